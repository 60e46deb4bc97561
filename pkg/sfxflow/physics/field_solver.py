'''
    Split-step spectral propagation of the emitted field and the pump through
    z slices.

    A slice step maps plane ``z`` to plane ``z + 1``::

        Ω⁺(z+1) = 𝒢 · IFFT[𝒦 · FFT Ω⁺(z)] + i · source⁺
        Ω⁻(z+1) = 𝒢* · IFFT[𝒦* · FFT Ω⁻(z)] - i · source⁻

    with ``𝒦 = exp(-i(kx² + ky²)Δz/2k₀)`` (times the optional spectral mask)
    and ``𝒢 = exp(-μΔz/2 - iδk₀Δz)``. Amplitudes decay for ``μ > 0``.

'''
import logging

import h5py
import numpy as np

from .grid_domain import transverse_wavenumbers, spectral_mask

#: J for photon energies in keV
KEV = 1.602176634e-16
EPSILON_0 = 8.8541878128e-12
SPEED_OF_LIGHT = 299792458.
#: photons m^-2 s^-1 -> photons nm^-2 fs^-1
FLUX_SI_TO_NATIVE = 1e-33
#: hc in keV nm
HC_KEV_NM = 1.23984198


class OpticalField(object):
    '''
        Emitted field on all planes, each component shape ``(2, nz + 1, nx, ny)``
        (polarization ``s = -1, +1`` first). The total field is the sum of the
        deterministic and noise parts.

    '''

    def __init__(self, det_plus, det_minus, noise_plus, noise_minus):
        self.det_plus = det_plus
        self.det_minus = det_minus
        self.noise_plus = noise_plus
        self.noise_minus = noise_minus

    @classmethod
    def zeros(cls, grid):
        shape = (2,) + grid.plane_shape
        return cls(*(np.zeros(shape, dtype=complex) for _ in range(4)))

    def __repr__(self):
        return f'OpticalField(shape={self.det_plus.shape})'

    @property
    def plus(self):
        return self.det_plus + self.noise_plus

    @property
    def minus(self):
        return self.det_minus + self.noise_minus

    def plane(self, iz):
        ''' ``(det_plus, det_minus, noise_plus, noise_minus)`` at plane ``iz``, each ``(2, nx, ny)`` '''
        return (self.det_plus[:, iz], self.det_minus[:, iz], self.noise_plus[:, iz], self.noise_minus[:, iz])

    def set_plane(self, iz, values):
        self.det_plus[:, iz], self.det_minus[:, iz], self.noise_plus[:, iz], self.noise_minus[:, iz] = values


class Propagator(object):
    '''
        Diffraction kernel for one carrier wavenumber.

        :param grid: ``GridSpec``

        :param wavenumber: ``float``, carrier wavenumber in nm^-1 (default ``grid.k0``)

        :param mask: ``array`` shape ``(nx, ny)`` or ``None``, real spectral mask

    '''

    def __init__(self, grid, wavenumber=None, mask=None):
        self.grid = grid
        self.wavenumber = grid.k0 if wavenumber is None else float(wavenumber)
        self.mask = mask
        _, self.K = make_kernels(grid, None, None, grid.dz, wavenumber=self.wavenumber, mask=mask)

    def __repr__(self):
        return f'Propagator(wavenumber={self.wavenumber:g}, mask={self.mask is not None})'

    def absorption(self, mu, delta=None):
        G, _ = make_kernels(self.grid, mu, delta, self.grid.dz, wavenumber=self.wavenumber)
        return G

    def step(self, field, G=None, conjugate=False):
        '''
            Diffract ``field`` (shape ``(..., nx, ny)``) over one slice, then
            multiply by the absorption/phase factor ``G`` (conjugated kernels
            for ``Ω⁻``)

        '''
        K = np.conj(self.K) if conjugate else self.K
        out = np.fft.ifft2(K * np.fft.fft2(field, axes=(-2, -1)), axes=(-2, -1))
        if G is not None:
            out = (np.conj(G) if conjugate else G) * out
        return out


def make_kernels(grid, mu_slice, delta_slice, dz, wavenumber=None, mask=None):
    '''
        Absorption/phase factor per voxel and diffraction factor per
        transverse mode for ``Ω⁺`` (conjugate both for ``Ω⁻``).

        :param mu_slice: ``array`` or ``float``, absorption coefficient in nm^-1, or ``None`` for no absorption

        :param delta_slice: ``array`` or ``float``, refractive index offset, or ``None``

        :param dz: ``float``, slice thickness in nm

        :returns: ``(G, K)``

    '''
    k0 = grid.k0 if wavenumber is None else wavenumber
    if mu_slice is None:
        G = np.ones(1)
    else:
        mu_slice = np.asarray(mu_slice, dtype=float)
        if np.any(mu_slice < 0):
            raise ValueError(f'absorption coefficient must be non-negative, min is {mu_slice.min()}')
        G = np.exp(-0.5 * mu_slice * dz)
    if delta_slice is not None:
        G = G * np.exp(-1j * np.asarray(delta_slice) * k0 * dz)
    else:
        G = G.astype(complex)
    kx, ky = transverse_wavenumbers(grid)
    K = np.exp(-1j * (kx[:, None]**2 + ky[None, :]**2) * dz / (2 * k0))
    if mask is not None:
        K = K * mask
    return G, K


def hermitian_sources(P_plus, P_minus, drift_mask):
    '''
        Drift-gauge substitution: where ``drift_mask`` holds, the coherence
        sources become ``½(𝒫⁺ + conj 𝒫⁻)`` and ``½(𝒫⁻ + conj 𝒫⁺)``

    '''
    if drift_mask is None:
        return P_plus, P_minus
    sym_plus = 0.5 * (P_plus + np.conj(P_minus))
    return np.where(drift_mask, sym_plus, P_plus), np.where(drift_mask, np.conj(sym_plus), P_minus)


def sf_slice_step(fields, rho_slice, n_slice, xi_plus, xi_minus, field_scale, drift_mask,
                  propagator, G, gamma, scheme, couple_atoms=True):
    '''
        Advance the emitted field through one slice.

        :param fields: ``(det_plus, det_minus, noise_plus, noise_minus)`` at plane ``z``, each ``(2, nx, ny)``

        :param rho_slice: ``array`` shape ``(nx, ny, n, n)``, pre-update atomic state of slice ``z``

        :param n_slice: ``array`` shape ``(nx, ny)``, number density in nm^-3

        :param xi_plus, xi_minus: ``array`` shape ``(2, nx, ny)`` or ``None`` for no noise

        :param field_scale: ``array`` shape ``(2, nx, ny)``, ``√(γ g/2Δτ)`` from ``gauge_scales``

        :param drift_mask: ``array`` of ``bool`` shape ``(2, nx, ny)`` or ``None``

        :param propagator: ``Propagator`` for the emitted carrier

        :param G: absorption factor, shape ``(2, nx, ny)`` or broadcastable, or ``None``

        :param gamma: ``float``, paraxial radiative rate in fs^-1

        :param couple_atoms: ``bool``, include the coherence sources (default ``True``)

        :returns: fields at plane ``z + 1``

    '''
    from .atomic_model import polarization_fields

    det_plus, det_minus, noise_plus, noise_minus = fields
    det_plus = propagator.step(det_plus, G)
    det_minus = propagator.step(det_minus, G, conjugate=True)
    noise_plus = propagator.step(noise_plus, G)
    noise_minus = propagator.step(noise_minus, G, conjugate=True)

    if couple_atoms:
        P_plus, P_minus = hermitian_sources(*polarization_fields(rho_slice, scheme), drift_mask)
        coeff = gamma * n_slice * propagator.grid.dV
        det_plus = det_plus + 1j * coeff * P_plus
        det_minus = det_minus - 1j * coeff * P_minus
    if xi_plus is not None:
        noise_plus = noise_plus + 2j * field_scale * xi_plus
        noise_minus = noise_minus - 2j * field_scale * xi_minus
    return det_plus, det_minus, noise_plus, noise_minus


def pump_slice_step(pump, mu_slice, propagator):
    '''
        Advance the pump envelope through one slice; real absorption only,
        no sources

        :param pump: ``array`` shape ``(nx, ny)``

        :param mu_slice: ``array`` shape ``(nx, ny)`` or ``float``, pump absorption coefficient

    '''
    return propagator.step(pump, propagator.absorption(mu_slice))


def pump_wavenumber(photon_energy):
    ''' Pump carrier wavenumber (nm^-1) for a photon energy in keV '''
    return 2 * np.pi * photon_energy / HC_KEV_NM


def pump_flux(pump, photon_energy):
    '''
        ``J_P = 2ε₀c|𝒫|²/(ħω_P)`` in photons nm^-2 fs^-1 for ``𝒫`` in V/m

    '''
    return 2 * EPSILON_0 * SPEED_OF_LIGHT * np.abs(pump)**2 / (photon_energy * KEV) * FLUX_SI_TO_NATIVE


def _gaussian(x, fwhm, center=0.):
    sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
    return np.exp(-(x - center)**2 / (2 * sigma**2)) / (np.sqrt(2 * np.pi) * sigma)


class PumpField(object):
    '''
        Separable Gaussian pump at the entrance plane. ``𝒫⁻ = conj(𝒫⁺)``, so
        only ``𝒫⁺`` (V/m) is stored.

        :param profile: ``array`` shape ``(nx, ny)``, transverse amplitude

        :param envelope: ``array`` shape ``(ntau,)``, temporal amplitude

        :param photon_energy: ``float``, keV

        :param photons: ``float``, total photon number the envelope is normalized to

    '''

    def __init__(self, profile, envelope, photon_energy, photons):
        self.profile = profile
        self.envelope = envelope
        self.photon_energy = photon_energy
        self.photons = photons

    def __repr__(self):
        return f'PumpField(photon_energy={self.photon_energy:g} keV, photons={self.photons:.4g})'

    def boundary(self, step):
        ''' ``𝒫⁺`` on the entrance plane at τ node ``step`` '''
        return self.profile * self.envelope[step]

    def flux(self, step):
        return pump_flux(self.boundary(step), self.photon_energy)

    def discrete_photons(self, grid):
        ''' Photon number from the discrete time-area sum of ``J_P`` '''
        area = np.sum(pump_flux(self.profile, self.photon_energy)) * grid.dx * grid.dy
        return area * np.sum(np.abs(self.envelope)**2) * grid.dtau


def build_pump_initial(grid, energy, photon_energy, fwhm_x, fwhm_y, fwhm_t, delay):
    '''
        Gaussian pump at the entrance plane with the continuous time-area
        integral of ``J_P`` equal to the photon count ``energy / E_photon``.

        :param energy: ``float``, pulse energy in μJ

        :param photon_energy: ``float``, keV

        :param fwhm_x, fwhm_y: ``float``, intensity FWHM in nm

        :param fwhm_t: ``float``, intensity FWHM in fs

        :param delay: ``float``, peak position in fs

        :returns: ``PumpField``

    '''
    photons = energy * 1e-6 / (photon_energy * KEV)
    for name, fwhm, extent in (('x', fwhm_x, grid.nx * grid.dx), ('y', fwhm_y, grid.ny * grid.dy)):
        if fwhm > extent / 4:
            logging.warning(f'pump FWHM along {name} ({fwhm:g} nm) exceeds a quarter of the '
                            f'transverse domain ({extent:g} nm), expect wrap-around')
    if photons == 0:
        return PumpField(np.zeros((grid.nx, grid.ny), dtype=complex), np.zeros(grid.ntau), photon_energy, 0.)

    # J_P(x, y, τ) = N gx(x) gy(y) gt(τ) with unit-area gaussians
    J_xy = photons * _gaussian(grid.x, fwhm_x)[:, None] * _gaussian(grid.y, fwhm_y)[None, :]
    amplitude_xy = np.sqrt(J_xy / FLUX_SI_TO_NATIVE * photon_energy * KEV / (2 * EPSILON_0 * SPEED_OF_LIGHT))
    envelope = np.sqrt(_gaussian(grid.tau, fwhm_t, delay))
    pump = PumpField(amplitude_xy.astype(complex), envelope, photon_energy, photons)

    discrete = pump.discrete_photons(grid)
    if abs(discrete / photons - 1) > 5e-3:
        logging.warning(f'discrete pump photon number {discrete:.4g} deviates from {photons:.4g} '
                        f'by more than 0.5%, the grid under-resolves the pump')
    return pump


def beer_lambert_photons(photons, mu, z):
    ''' Photon number after depth ``z`` (nm) at constant ``μ`` (nm^-1) '''
    return photons * np.exp(-mu * np.asarray(z))


class SeedPulse(object):
    '''
        Deterministic field injected at plane 0, ``Ω⁺_det`` given per τ node
        with shape ``(ntau, 2, nx, ny)``; ``Ω⁻_det = conj(Ω⁺_det)``.

    '''

    def __init__(self, omega_plus):
        self.omega_plus = omega_plus

    def __repr__(self):
        return f'SeedPulse(shape={self.omega_plus.shape}, peak={np.abs(self.omega_plus).max():g})'

    def boundary(self, step):
        plus = self.omega_plus[step]
        return plus, np.conj(plus)


def seed_pulse(grid, amplitude=0., polarization=1, fwhm_x=200., fwhm_y=200., fwhm_t=5., delay=15.,
               seed_file=None, seed_dataset='seed'):
    '''
        Build the entrance-plane seed for seeded runs, either a Gaussian of
        peak Rabi frequency ``amplitude`` (fs^-1) in one polarization or an
        array read from ``seed_file[seed_dataset]`` with shape
        ``(ntau, 2, nx, ny)``.

        :returns: ``SeedPulse`` or ``None`` when no seed is configured

    '''
    if seed_file is not None:
        with h5py.File(seed_file, 'r') as f:
            if seed_dataset not in f:
                raise RuntimeError(f'seed dataset {seed_dataset} not found in {seed_file}')
            data = np.asarray(f[seed_dataset], dtype=complex)
        expected = (grid.ntau, 2, grid.nx, grid.ny)
        if data.shape != expected:
            raise ValueError(f'seed array has shape {data.shape}, expected {expected}')
        return SeedPulse(data)
    if amplitude == 0:
        return None
    if polarization not in (-1, 1):
        raise ValueError(f'polarization must be -1 or +1, got {polarization}')
    s = 0 if polarization == -1 else 1
    # intensity FWHM -> amplitude gaussian
    sx, sy, st = (fwhm / (2 * np.sqrt(np.log(2))) for fwhm in (fwhm_x, fwhm_y, fwhm_t))
    profile = np.exp(-grid.x[:, None]**2 / (2 * sx**2) - grid.y[None, :]**2 / (2 * sy**2))
    envelope = np.exp(-(grid.tau - delay)**2 / (2 * st**2))
    omega_plus = np.zeros((grid.ntau, 2, grid.nx, grid.ny), dtype=complex)
    omega_plus[:, s] = amplitude * envelope[:, None, None] * profile[None]
    return SeedPulse(omega_plus)


def gaussian_beam_width(w0, z, wavelength):
    ''' Waist radius ``w(z) = w₀√(1 + (z/z_R)²)`` with ``z_R = πw₀²/λ`` '''
    z_R = np.pi * w0**2 / wavelength
    return w0 * np.sqrt(1 + (np.asarray(z) / z_R)**2)


def propagate_pump(boundary, mu_pump, propagator):
    '''
        March the pump from the entrance plane through every slice

        :param boundary: ``array`` shape ``(nx, ny)``, ``𝒫⁺`` at plane 0

        :param mu_pump: ``array`` shape ``(nz, nx, ny)``, pump absorption per slice

        :returns: ``array`` shape ``(nz + 1, nx, ny)``

    '''
    nz = mu_pump.shape[0]
    planes = np.empty((nz + 1,) + boundary.shape, dtype=complex)
    planes[0] = boundary
    for iz in range(nz):
        planes[iz + 1] = pump_slice_step(planes[iz], mu_pump[iz], propagator)
    return planes
