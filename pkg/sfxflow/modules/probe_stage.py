import logging

import numpy as np

from sfxflow.core import SFXStage, resources
from sfxflow.config import FIELD_OBSERVABLES
from sfxflow.physics import (effective_inversion, polarization_fields, bloch_vector, pump_flux,
                             flux_normalization)
from sfxflow.observables import (pair_average, correlation_J, BandCorrelation, spectral_angular, wigner,
                                 transverse_correlation, stokes, shift_range, stokes_pair_products,
                                 gain_coefficient)

#: observables computed from the stored probe-plane history
_HISTORY_OBSERVABLES = ('photon_flux', 'correlation_J', 'spectral_angular', 'wigner', 'transverse_correlation',
                        'stokes', 'polarization_correlation')

#: observable -> observables it is computed from
_DEPENDENCIES = dict(
    transform_limited=('photon_rate_vs_z',),
    photon_number_vs_z=('photon_rate_vs_z',),
    polarization_correlation=('stokes',),
)


class ObservableProbeStage(SFXStage):
    '''
        Records the requested observables of one trajectory and leaves one
        sample per observable in ``state.samples`` after the last τ step.

        Field observables are taken at the probe planes (``output.probes``,
        sorted so the deepest plane, normally the exit, is last) and, for
        equal-time quantities, at the probe time ``output.probe_tau``
        (default: the centre of the window). Equal-time field products are
        averaged over neighbouring τ nodes (``run.n_smooth``). Medium
        observables are transverse means of the state at the start of each
        step unless noted.

        Parameters:

         - ``n_smooth``: ``int``, override ``run.n_smooth``
         - ``bloch_levels``: ``[u, l]`` level pair of the on-axis Bloch vector (default ``[0, 2]``)
         - ``observables``: ``list`` of ``str``, override ``output.observables``

    '''
    class_version = '0.0.0'

    default_bloch_levels = (0, 2)

    def __init__(self, **params):
        super(ObservableProbeStage, self).__init__(**params)
        self.n_smooth = params.get('n_smooth', self.config['run']['n_smooth'])
        self.bloch_levels = tuple(params.get('bloch_levels', self.default_bloch_levels))
        self.requested = list(params.get('observables', self.config.observables))

    def init(self, source_name):
        super(ObservableProbeStage, self).init(source_name)
        res = resources['SimulationResource']
        self.grid = res.grid
        self.scheme = res.scheme
        self.emits = res.emits
        self.norm = flux_normalization(self.grid.wavelength, self.scheme.gamma_rad)

        self.planes = self.config.probe_planes()
        probe_tau = self.config['output']['probe_tau']
        self.probe_tau = self.grid.tau_index(probe_tau) if probe_tau is not None else self.grid.ntau // 2
        max_shift = self.config['output']['polarization_shift']
        self.shifts_x = shift_range(self.grid.nx, max_shift)
        self.shifts_y = shift_range(self.grid.ny, max_shift)

        names = set(self.requested)
        for name in self.requested:
            names.update(_DEPENDENCIES.get(name, ()))
        if not self.emits:
            dropped = sorted(n for n in names if n in FIELD_OBSERVABLES)
            if dropped:
                logging.warning(f'no emitted field in mode {self.config.mode}, skipping {dropped}')
            names.difference_update(FIELD_OBSERVABLES)
        self.names = names
        self.keep_history = any(n in names for n in _HISTORY_OBSERVABLES)

        self.data_manager.set_attrs('observables', probe_planes=np.array(self.planes),
                                    probe_tau=self.probe_tau, n_smooth=self.n_smooth,
                                    bloch_levels=np.array(self.bloch_levels),
                                    requested=','.join(self.requested))

    def _shapes(self):
        g = self.grid
        P = len(self.planes)
        nz, ntau = g.nz, g.ntau
        return dict((
            ('photon_flux', ((P, 2, ntau, g.nx, g.ny), complex, ('probe', 'polarization', 'tau', 'x', 'y'),
                             'photons nm^-2 fs^-1')),
            ('correlation_J', ((P, 2, ntau, ntau), complex, ('probe', 'polarization', 'tau1', 'tau2'),
                               'photons fs^-1')),
            ('spectral_angular', ((2, g.nx, g.ny, ntau), complex, ('polarization', 'theta_x', 'theta_y', 'omega'),
                                  'photons nm^2 fs')),
            ('wigner', ((2, 2 * ntau, ntau), complex, ('polarization', 'omega', 'tau'), 'photons nm^-2')),
            ('transverse_correlation', ((P, 2, g.nx, g.ny), complex, ('probe', 'polarization', 'dx', 'dy'),
                                        'photons fs^-1')),
            ('stokes', ((4, P, g.nx, g.ny), complex, ('stokes', 'probe', 'x', 'y'), 'photons nm^-2 fs^-1')),
            ('polarization_correlation', ((P, len(self.shifts_x), len(self.shifts_y), g.nx, g.ny), complex,
                                          ('probe', 'dx', 'dy', 'x', 'y'), 'photons^2 nm^-4 fs^-2')),
            ('photon_rate_vs_z', ((2, nz + 1, ntau), complex, ('polarization', 'z', 'tau'), 'photons fs^-1')),
            ('photon_number_vs_z', ((2, nz + 1), complex, ('polarization', 'z'), 'photons')),
            ('axis_history/flux', ((2, nz + 1, ntau), complex, ('polarization', 'z', 'tau'), 'photons nm^-2 fs^-1')),
            ('axis_history/inversion', ((2, nz, ntau), float, ('polarization', 'z', 'tau'), '')),
            ('axis_history/polarization_product', ((2, nz, ntau), complex, ('polarization', 'z', 'tau'), '')),
            ('conjugate_norms', ((2, 2, nz + 1), float, ('combination', 'polarization', 'z'), 'nm^2 fs^-1')),
            ('effective_inversion', ((2, 2, nz, ntau), float, ('component', 'polarization', 'z', 'tau'), '')),
            ('gain_coefficient', ((2, nz, ntau), float, ('polarization', 'z', 'tau'), 'nm^-1')),
            ('polarization_fields/plus', ((2, nz, ntau), complex, ('polarization', 'z', 'tau'), '')),
            ('polarization_fields/product', ((2, nz, ntau), complex, ('polarization', 'z', 'tau'), '')),
            ('bloch_vector', ((3, nz, ntau), complex, ('component', 'z', 'tau'), '')),
            ('pump_photons', ((nz + 1,), float, ('z',), 'photons')),
            ('pump_fluence', ((nz + 1, g.nx), float, ('z', 'x'), 'photons nm^-2')),
            ('ground_state_after_pump', ((nz, g.nx), float, ('z', 'x'), '')),
        ))

    def _expand(self, name):
        # observables stored under several entries
        if name == 'axis_history':
            return ['axis_history/flux', 'axis_history/inversion', 'axis_history/polarization_product']
        if name == 'polarization_fields':
            return ['polarization_fields/plus', 'polarization_fields/product']
        if name == 'transform_limited':
            return []
        return [name]

    @property
    def entries(self):
        ''' ``list`` of stored observable entries '''
        return sorted(entry for name in self.names for entry in self._expand(name))

    def register(self, accumulator):
        shapes = self._shapes()
        for entry in self.entries:
            shape, dtype, axes, units = shapes[entry]
            accumulator.register(entry, shape, dtype=dtype, axes=axes, units=units)

    def reset(self):
        g = self.grid
        ntau = g.ntau
        self.buffers = dict()
        shapes = self._shapes()
        for entry in self.entries:
            shape, dtype, _, _ = shapes[entry]
            self.buffers[entry] = np.zeros(shape, dtype=dtype)
        if self.keep_history:
            shape = (ntau, 2, len(self.planes), g.nx, g.ny)
            self.hist_plus = np.zeros(shape, dtype=complex)
            self.hist_minus = np.zeros(shape, dtype=complex)

        dx, dy, norm = g.dx, g.dy, self.norm
        self.rate_band = BandCorrelation(ntau, self.n_smooth,
                                         lambda a, b: np.einsum('szxy,szxy->sz', a, b) * dx * dy / norm)
        self.axis_band = BandCorrelation(ntau, self.n_smooth, lambda a, b: a * b / norm)

    def run(self, trajectory, step, state):
        super(ObservableProbeStage, self).run(trajectory, step, state)
        if step == 0:
            self.reset()
        self.record_medium(step, state)
        if self.emits:
            self.record_field(step, state)
        if step == self.grid.ntau - 1:
            self.collect(state)

    def record_medium(self, step, state):
        g, b = self.grid, self.buffers
        cx, cy = g.center
        rho = state.rho_pre if state.rho_pre is not None else state.rho

        if {'effective_inversion', 'gain_coefficient', 'axis_history/inversion'} & set(b):
            up, low = effective_inversion(rho, self.scheme)
            if 'effective_inversion' in b:
                b['effective_inversion'][..., step] = np.real(np.stack([up, low])).mean(axis=(-2, -1))
            if 'gain_coefficient' in b:
                n = resources['SimulationResource'].n
                gain = gain_coefficient(up, low, n, self.scheme.gamma_dec, g.wavelength, self.scheme.gamma_rad)
                b['gain_coefficient'][..., step] = gain.mean(axis=(-2, -1))
            if 'axis_history/inversion' in b:
                b['axis_history/inversion'][..., step] = np.real(up - low)[..., cx, cy]

        if {'polarization_fields/plus', 'axis_history/polarization_product'} & set(b):
            P_plus, P_minus = polarization_fields(rho, self.scheme)
            product = P_plus * P_minus
            if 'polarization_fields/plus' in b:
                b['polarization_fields/plus'][..., step] = P_plus.mean(axis=(-2, -1))
                b['polarization_fields/product'][..., step] = product.mean(axis=(-2, -1))
            if 'axis_history/polarization_product' in b:
                b['axis_history/polarization_product'][..., step] = product[..., cx, cy]

        if 'bloch_vector' in b:
            b['bloch_vector'][..., step] = bloch_vector(rho[:, cx, cy], *self.bloch_levels)

        if state.pump_planes is not None and {'pump_photons', 'pump_fluence'} & set(b):
            flux = pump_flux(state.pump_planes, resources['SimulationResource'].pump.photon_energy)
            if 'pump_photons' in b:
                b['pump_photons'] += flux.sum(axis=(-2, -1)) * g.dx * g.dy * g.dtau
            if 'pump_fluence' in b:
                b['pump_fluence'] += flux[:, :, cy] * g.dtau

    def record_field(self, step, state):
        g, b = self.grid, self.buffers
        cx, cy = g.center
        plus, minus = state.field.plus, state.field.minus
        if self.keep_history:
            self.hist_plus[step] = plus[:, self.planes]
            self.hist_minus[step] = minus[:, self.planes]
        if 'photon_rate_vs_z' in b:
            self.rate_band.update(step, plus, minus)
        if 'axis_history/flux' in b:
            self.axis_band.update(step, plus[..., cx, cy], minus[..., cx, cy])
        if 'conjugate_norms' in b:
            for i, combination in enumerate((plus + np.conj(minus), plus - np.conj(minus))):
                b['conjugate_norms'][i] += np.sum(np.abs(combination)**2, axis=(-2, -1)) * g.dx * g.dy * g.dtau

    def collect(self, state):
        '''
            Turn the recorded buffers into samples

        '''
        g, b = self.grid, self.buffers
        gamma_rad, wavelength = self.scheme.gamma_rad, g.wavelength
        cx, cy = g.center
        samples = dict()

        if 'photon_rate_vs_z' in b:
            rate = np.moveaxis(self.rate_band.smoothed(), 0, -1)
            samples['photon_rate_vs_z'] = rate
            number = rate.sum(axis=-1) * g.dtau
            if 'photon_number_vs_z' in b:
                samples['photon_number_vs_z'] = number
            state.exit_photons = number[:, -1]
        if 'axis_history/flux' in b:
            samples['axis_history/flux'] = np.moveaxis(self.axis_band.smoothed(), 0, -1)

        if self.keep_history:
            hp, hm = self.hist_plus, self.hist_minus
            exit_plane = len(self.planes) - 1
            if 'photon_flux' in b:
                flux = pair_average(lambda p, m: p * m, hp, hm, self.n_smooth) / self.norm
                samples['photon_flux'] = np.transpose(flux, (2, 1, 0, 3, 4))
            if 'correlation_J' in b:
                samples['correlation_J'] = np.stack([
                    correlation_J(hp[:, :, p], hm[:, :, p], gamma_rad, wavelength, g.dx, g.dy,
                                  integrate=True, n_smooth=self.n_smooth)
                    for p in range(len(self.planes))])
            if 'spectral_angular' in b:
                samples['spectral_angular'] = spectral_angular(hp[:, :, exit_plane], hm[:, :, exit_plane],
                                                               g, gamma_rad)[0]
            if 'wigner' in b:
                series_plus = hp[:, :, exit_plane, cx, cy]
                series_minus = hm[:, :, exit_plane, cx, cy]
                flux = pair_average(lambda p, m: p * m, series_plus, series_minus, self.n_smooth) / self.norm
                W = wigner(series_plus, series_minus, g.dtau, gamma_rad, wavelength, smoothed_flux=flux)['W']
                samples['wigner'] = np.moveaxis(W, -1, 0)
            if 'transverse_correlation' in b:
                gamma = pair_average(lambda p, m: transverse_correlation(p, m, g.dx, g.dy, gamma_rad, wavelength),
                                     hp, hm, self.n_smooth, index=self.probe_tau)
                samples['transverse_correlation'] = np.swapaxes(gamma, 0, 1)
            if 'stokes' in b:
                S = pair_average(lambda p, m: stokes(p, m, gamma_rad, wavelength), hp, hm, self.n_smooth,
                                 index=self.probe_tau)
                samples['stokes'] = S
                if 'polarization_correlation' in b:
                    samples['polarization_correlation'] = stokes_pair_products(S, self.shifts_x, self.shifts_y)

        for entry in ('axis_history/inversion', 'axis_history/polarization_product', 'conjugate_norms',
                      'effective_inversion', 'gain_coefficient', 'polarization_fields/plus',
                      'polarization_fields/product', 'bloch_vector', 'pump_photons', 'pump_fluence'):
            if entry in b:
                samples[entry] = b[entry]
        if 'ground_state_after_pump' in b:
            samples['ground_state_after_pump'] = np.real(state.rho_ground[:, :, cy])

        state.samples.update(samples)
