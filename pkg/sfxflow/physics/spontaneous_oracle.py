'''
    Analytic spontaneous-emission reference for the stochastic solver.

    In the low-density limit the emitted-field correlation at exit plane ``p``
    is a sum over independent source voxels::

        J_s(r, τ₁, τ₂) = γ Δz Σ_{z'<p} Σ_{r'} n ⟨ρ_up,s⟩(r', z', min τ) |G_{p-z'-1}(r - r')|² · A · D(τ₁, τ₂)

    in photons nm^-2 fs^-1, where ``G_m`` is ``m`` applications of the
    solver's diffraction kernel to a unit pixel, ``A`` the emitted-field
    attenuation between the source slice and the plane, and ``D`` the
    coherence decay ``exp(-γ_dec |τ₁ - τ₂|)``. Equal times give the photon
    flux.

    With ``discrete=True`` the decay follows the time stepping of the
    solver instead: coherences written at step ``k`` reach the field at step
    ``k + 1``, so ``D = exp(-γ_dec (|τ₁ - τ₂| - Δτ))`` for distinct nodes and
    the equal-node value vanishes. Flux values are then reported after the
    same neighbour-pair smoothing the ensemble estimators use. ``run_oracle``
    compares against the ensemble in this form.

'''
import logging

import numpy as np

from .grid_domain import number_density, flux_normalization, effective_gamma, spectral_mask
from .field_solver import Propagator, build_pump_initial, propagate_pump, pump_flux, pump_wavenumber
from .atomic_model import IncoherentRates, absorption_coefficients, effective_inversion
from .bloch_solver import rk4_step
from ..observables import estimators


class GreenFunction(object):
    '''
        Discretized paraxial Green function of the emitted field, sampled by
        propagating a unit pixel source through the solver's kernels. Index
        ``m`` counts diffraction steps between source and observation plane.

        :param propagator: ``Propagator`` of the emitted field

        :param max_steps: ``int``, largest ``m`` needed (usually ``nz - 1``)

    '''

    def __init__(self, propagator, max_steps):
        self.propagator = propagator
        self.grid = propagator.grid
        self.max_steps = int(max_steps)
        # delta source -> flat spectrum, so G_m = IFFT(K^m)
        K = propagator.K
        self._amplitude = np.stack([np.fft.ifft2(K**m) for m in range(self.max_steps + 1)])
        self.intensity = np.abs(self._amplitude)**2
        self.transmission = self.intensity.sum(axis=(-2, -1))

    def __repr__(self):
        return f'GreenFunction(max_steps={self.max_steps}, grid={self.grid!r})'

    def amplitude(self, m):
        ''' ``G_m`` with the source at pixel ``(0, 0)``, shape ``(nx, ny)`` '''
        return self._amplitude[m]

    def convolve(self, source, m):
        '''
            Periodic convolution of a source density (``(..., nx, ny)``) with
            ``|G_m|²``

        '''
        return np.real(np.fft.ifft2(np.fft.fft2(source, axes=(-2, -1)) * np.fft.fft2(self.intensity[m]), axes=(-2, -1)))


def green_intensity(grid, m, mask=None):
    '''
        Convenience wrapper: ``|G_m|²`` for a fresh propagator on ``grid``

        :returns: ``array`` shape ``(nx, ny)`` with the source at pixel ``(0, 0)``

    '''
    return GreenFunction(Propagator(grid, mask=mask), m).intensity[m]


def _decay_exponent(gamma_dec, ntau, dtau, decay):
    '''
        Cumulative decay exponent ``C[k]``: the coherence decays by
        ``exp(-(C[b] - C[a]))`` between nodes ``a < b``

    '''
    rates = np.broadcast_to(np.asarray(gamma_dec, dtype=float), (ntau,))
    if np.any(rates < 0):
        raise ValueError('coherence decay rate must be non-negative')
    x = rates * dtau
    if decay == 'exact':
        per_step = x
    elif decay == 'rk4':
        factor = 1 - x + x**2 / 2 - x**3 / 6 + x**4 / 24
        if np.any(factor <= 0):
            raise ValueError(f'RK4 decay factor not positive for γ_dec Δτ = {x.max():g}')
        per_step = -np.log(factor)
    else:
        raise ValueError(f'unknown decay model {decay}')
    return np.concatenate([[0.], np.cumsum(per_step)])


def decay_matrix(gamma_dec, ntau, dtau, decay='exact', discrete=False):
    '''
        Coherence decay between every pair of τ nodes. ``exp(-γ_dec |τ₁ - τ₂|)``
        with a unit diagonal, or with ``discrete=True`` lagged by one step
        with a zero diagonal.

        :param gamma_dec: ``float`` or ``array`` shape ``(ntau,)`` in fs^-1

        :param decay: ``'exact'`` (continuous exponential) or ``'rk4'`` (per-step RK4 amplification factor)

        :param discrete: ``bool``, coherences reach the field one step after they are written

        :returns: ``array`` shape ``(ntau, ntau)``

    '''
    C = _decay_exponent(gamma_dec, ntau, dtau, decay)
    a = np.arange(ntau)
    lo = np.minimum(a[:, None], a[None, :])
    hi = np.maximum(a[:, None], a[None, :])
    if not discrete:
        return np.exp(-(C[hi] - C[lo]))
    D = np.exp(-(C[hi] - C[np.minimum(lo + 1, hi)]))
    D[a, a] = 0.
    return D


def _attenuation(mu, dz, plane):
    '''
        Half-exponent ``½ Σ_{k=z'+1}^{p-1} μ_k Δz`` for every source slice
        ``z' < p``

        :param mu: ``array`` shape ``(2, ntau, nz)`` or ``None``

        :returns: ``array`` shape ``(2, ntau, plane)`` or ``None``

    '''
    if mu is None:
        return None
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError(f'absorption coefficient must be non-negative, min is {mu.min()}')
    tail = np.zeros(mu.shape[:-1] + (plane,))
    for zs in range(plane):
        tail[..., zs] = 0.5 * mu[..., zs + 1:plane].sum(axis=-1) * dz
    return tail


def analytic_J_matrix(rho_up, n, gamma_dec, grid, green, plane, gamma, mu=None, decay='exact', n_smooth=None,
                      discrete=False):
    '''
        Transverse-integrated two-time correlation at ``plane`` for every
        pair of τ nodes.

        :param rho_up: ``array`` shape ``(2, ntau, nz, nx, ny)``, upper-population history

        :param n: ``array`` shape ``(nz, nx, ny)``, number density in nm^-3

        :param gamma_dec: ``float`` or ``array`` shape ``(ntau,)``

        :param green: ``GreenFunction``

        :param plane: ``int``, observation plane in ``1..nz``

        :param gamma: ``float``, paraxial radiative rate in fs^-1

        :param mu: ``array`` shape ``(2, ntau, nz)`` or ``None``, per-slice emitted-field absorption

        :param n_smooth: ``int`` or ``None``, replace the diagonal by the neighbour-pair average

        :param discrete: ``bool``, see ``decay_matrix``

        :returns: ``array`` shape ``(2, ntau, ntau)`` in photons fs^-1

    '''
    if not 0 <= plane <= grid.nz:
        raise ValueError(f'plane {plane} outside 0..{grid.nz}')
    ntau = grid.ntau
    if plane == 0:
        return np.zeros((2, ntau, ntau))
    # W[s, t, z'] = Σ_r n ρ_up
    W = np.einsum('stzxy,zxy->stz', np.real(rho_up[:, :, :plane]), n[:plane])
    S = green.transmission[plane - 1::-1][:plane]
    t = np.arange(ntau)
    tmin = np.minimum(t[:, None], t[None, :])
    source = W[:, tmin, :] * S
    tail = _attenuation(mu, grid.dz, plane)
    if tail is not None:
        source = source * np.exp(-(tail[:, :, None, :] + tail[:, None, :, :]))
    J = gamma * grid.dz * grid.dx * grid.dy * source.sum(axis=-1)
    J = J * decay_matrix(gamma_dec, ntau, grid.dtau, decay, discrete=discrete)
    if n_smooth is not None:
        J = estimators.smooth_diagonal(J, n_smooth)
    return J


def analytic_J(rho_up, n, gamma_dec, grid, green, plane, gamma, tau1, tau2, mu=None, decay='exact',
               discrete=False):
    '''
        Per-pixel correlation ``J_s(r, τ₁, τ₂)`` at ``plane``. Equal times
        give the photon flux, or zero with ``discrete=True``.

        :param tau1, tau2: ``float``, times in fs within the simulated window

        :returns: ``array`` shape ``(2, nx, ny)`` in photons nm^-2 fs^-1

    '''
    a, b = grid.tau_index(tau1), grid.tau_index(tau2)
    if not 1 <= plane <= grid.nz:
        raise ValueError(f'plane {plane} outside 1..{grid.nz}')
    t = min(a, b)
    tail = _attenuation(mu, grid.dz, plane)
    J = np.zeros((2, grid.nx, grid.ny))
    for zs in range(plane):
        source = np.real(rho_up[:, t, zs]) * n[zs]
        contrib = green.convolve(source, plane - zs - 1)
        if tail is not None:
            contrib = contrib * np.exp(-(tail[:, a, zs] + tail[:, b, zs]))[:, None, None]
        J += contrib
    D = decay_matrix(gamma_dec, grid.ntau, grid.dtau, decay, discrete=discrete)[a, b]
    return gamma * grid.dz * J * D


def _flux_pairs(tau, ntau, n_smooth, discrete):
    if not discrete:
        return [(tau, tau)]
    ns = max(int(n_smooth), 2)
    start = min(tau, ntau - ns)
    window = range(start, start + ns)
    return [(a, b) for a in window for b in window if a != b]


def oracle_flux_map(rho_up, n, gamma_dec, grid, green, plane, gamma, n_smooth, mu=None, decay='exact',
                    discrete=False):
    '''
        Photon flux ``I_s(r, τ)`` at ``plane`` (photons nm^-2 fs^-1), the
        equal-time correlation. With ``discrete=True`` it is the
        neighbour-pair average over ``n_smooth`` nodes.

        :returns: ``array`` shape ``(2, ntau, nx, ny)``

    '''
    ntau = grid.ntau
    flux = np.zeros((2, ntau, grid.nx, grid.ny))
    if plane == 0:
        return flux
    tail = _attenuation(mu, grid.dz, plane)
    D = decay_matrix(gamma_dec, ntau, grid.dtau, decay, discrete=discrete)
    # Q[zs, s, t] = (n ρ_up ⊛ |G|²) from slice zs
    Q = np.stack([green.convolve(np.real(rho_up[:, :, zs]) * n[zs], plane - zs - 1) for zs in range(plane)])
    for tau in range(ntau):
        pairs = _flux_pairs(tau, ntau, n_smooth, discrete)
        for a, b in pairs:
            weight = np.ones((plane, 2)) if tail is None else np.exp(-(tail[:, a] + tail[:, b])).T
            flux[:, tau] += np.einsum('zs,zsxy->sxy', weight, Q[:, :, min(a, b)]) * D[a, b]
        flux[:, tau] /= len(pairs)
    return gamma * grid.dz * flux


def oracle_photon_number(rho_up, n, gamma_dec, grid, green, gamma, n_smooth, mu=None, decay='exact',
                         discrete=False):
    '''
        Accumulated spontaneous photon number at every plane

        :returns: ``array`` shape ``(2, nz + 1)``

    '''
    N = np.zeros((2, grid.nz + 1))
    for plane in range(1, grid.nz + 1):
        J = analytic_J_matrix(rho_up, n, gamma_dec, grid, green, plane, gamma, mu=mu, decay=decay,
                              n_smooth=n_smooth if discrete else None, discrete=discrete)
        N[:, plane] = np.real(np.einsum('stt->s', J)) * grid.dtau
    return N


def photon_rate_asymptotics(population_integral, gamma_rad, regime, area=None, z=None, solid_angle=None):
    '''
        Asymptotic spontaneous photon rate per polarization.

         - ``'far'``: ``(3/8π)(S/z²)Γ_rad ∫n⟨ρ_up⟩``
         - ``'near'``: ``(3/8π)Δo Γ_rad ∫n⟨ρ_up⟩``

        :param population_integral: ``float`` or ``array``, ``∫ n ⟨ρ_up⟩ dV`` (number of inverted emitters)

        :param regime: ``'far'`` or ``'near'``

        :param area: ``float``, detector cross-section ``S`` in nm^2 (far field)

        :param z: ``float`` or ``array``, distance in nm (far field)

        :param solid_angle: ``float``, paraxial solid angle ``Δo`` (near field), e.g. ``λ₀²/(ΔxΔy)``

        :returns: photons fs^-1

    '''
    pref = 3 / (8 * np.pi) * gamma_rad * np.asarray(population_integral)
    if regime == 'far':
        if area is None or z is None:
            raise ValueError('far-field rate needs area and z')
        return pref * area / np.asarray(z, dtype=float)**2
    if regime == 'near':
        if solid_angle is None:
            raise ValueError('near-field rate needs solid_angle')
        return pref * solid_angle
    raise ValueError(f'unknown regime {regime}, expected "far" or "near"')


def analytic_spectrum(J, dtau, gamma_dec=None):
    '''
        Spectrum of a two-time correlation by Fourier transform over
        ``τ₁ - τ₂`` of the stationary part ``C(k) = mean_t J[t + k, t]``.

        :param J: ``array`` shape ``(ntau, ntau)``, diagonal already smoothed

        :param dtau: ``float``, τ step in fs

        :param gamma_dec: ``float``, expected HWHM, used only for the window-length warning

        :returns: ``dict`` with ``omega``, ``spectrum``, ``hwhm`` (from a log-linear fit of ``Re C``),
            ``hwhm_direct`` (half-maximum width of the spectrum), ``lorentzian``, ``residual``

    '''
    J = np.asarray(J)
    ntau = J.shape[-1]
    window = ntau * dtau
    if gamma_dec is not None and window < 3 / gamma_dec:
        logging.warning(f'correlation window {window:g} fs is shorter than 3/γ_dec = {3 / gamma_dec:g} fs, '
                        'the spectrum is truncation-broadened')

    lags = np.arange(-(ntau - 1), ntau)
    C = np.array([np.mean(np.diagonal(J, offset=-k)) for k in lags])

    # C(k) ∝ exp(-γ|k|Δτ), fit from k >= 1 where the equal-node term does not enter
    k_fit = np.arange(1, ntau)
    c_fit = np.real(C[ntau:])
    ok = c_fit > 0
    if np.count_nonzero(ok) >= 2:
        slope, _ = np.polyfit(k_fit[ok] * dtau, np.log(c_fit[ok]), 1, w=np.sqrt(c_fit[ok]))
        hwhm = -slope
    else:
        hwhm = np.nan

    spectrum = np.real(np.fft.fftshift(np.fft.fft(np.fft.ifftshift(C)))) * dtau / (2 * np.pi)
    omega = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(lags.size, d=dtau))
    peak = spectrum.max()
    above = omega[spectrum >= 0.5 * peak]
    hwhm_direct = 0.5 * (above.max() - above.min()) if above.size else np.nan

    area = np.sum(spectrum) * (omega[1] - omega[0])
    width = hwhm if np.isfinite(hwhm) and hwhm > 0 else hwhm_direct
    lorentzian = area / np.pi * width / (omega**2 + width**2)
    residual = np.sqrt(np.sum((spectrum - lorentzian)**2) / max(np.sum(spectrum**2), 1e-300))
    return dict(omega=omega, spectrum=spectrum, correlation=C, lags=lags * dtau,
                hwhm=hwhm, hwhm_direct=hwhm_direct, lorentzian=lorentzian, residual=residual)


class PopulationHistory(object):
    '''
        Result of a field-free kinetics run.

         - ``rho_up``, ``rho_low``: shape ``(2, ntau, nz, nx, ny)``, pre-step values at each τ node
         - ``rho_ground``: shape ``(ntau + 1, nz, nx, ny)``
         - ``mu``: emitted-field absorption, shape ``(2, ntau, nz)`` (transverse mean per slice)
         - ``gamma_dec``: shape ``(ntau,)``, coherence decay rate weighted by ``n ρ_up``
         - ``pump_planes``: pump photons through each plane, shape ``(nz + 1,)``

    '''

    def __init__(self, grid, n, rho_up, rho_low, rho_ground, mu, gamma_dec, pump_planes):
        self.grid = grid
        self.n = n
        self.rho_up = rho_up
        self.rho_low = rho_low
        self.rho_ground = rho_ground
        self.mu = mu
        self.gamma_dec = gamma_dec
        self.pump_planes = pump_planes

    def __repr__(self):
        return f'PopulationHistory(grid={self.grid!r})'

    def population_integral(self, plane=None):
        ''' ``Σ n ρ_up ΔV`` over slices before ``plane`` per polarization and τ, shape ``(2, ntau)`` '''
        plane = self.grid.nz if plane is None else plane
        return np.einsum('stzxy,zxy->st', np.real(self.rho_up[:, :, :plane]), self.n[:plane]) * self.grid.dV


def pump_only_history(config, scheme=None, table=None):
    '''
        Integrate the field-free kinetics (pump propagation with bleaching
        plus the RK4 atomic update, no emitted field, no noise) once.

        :param config: ``RunConfig``

        :returns: ``PopulationHistory``

    '''
    if scheme is None or table is None:
        scheme, table = config.atomic_model()
    grid = config.grid_spec()
    n = number_density(grid, config.number_density, config['medium']['profile'], config['medium']['profile_fwhm'])
    p = config['pump']
    pump = build_pump_initial(grid, p['energy'], p['photon_energy'], p['fwhm_x'], p['fwhm_y'], p['fwhm_t'], p['delay'])
    pump_prop = Propagator(grid, wavenumber=pump_wavenumber(p['photon_energy']))

    rho = np.zeros(grid.voxel_shape + (scheme.n_levels, scheme.n_levels), dtype=complex)
    rho_ground = np.ones(grid.voxel_shape, dtype=complex)
    rho_aux = np.zeros(grid.voxel_shape, dtype=complex)
    zero_omega = np.zeros((2,) + grid.voxel_shape)

    rho_up = np.zeros((2, grid.ntau) + grid.voxel_shape)
    rho_low = np.zeros((2, grid.ntau) + grid.voxel_shape)
    ground = np.zeros((grid.ntau + 1,) + grid.voxel_shape)
    ground[0] = 1.
    mu_omega = np.zeros((2, grid.ntau, grid.nz))
    gamma_dec = np.full(grid.ntau, scheme.gamma_dec)
    pump_planes = np.zeros(grid.nz + 1)

    for step in range(grid.ntau):
        up, low = effective_inversion(rho, scheme)
        rho_up[:, step], rho_low[:, step] = np.real(up), np.real(low)
        populations = np.einsum('...ii->...i', rho)
        mu = absorption_coefficients(rho_ground, rho_aux, populations, n, table)
        mu_omega[:, step] = mu[1:].mean(axis=(-2, -1))

        planes = propagate_pump(pump.boundary(step), mu[0], pump_prop)
        J_pump = pump_flux(planes[:-1], pump.photon_energy)
        pump_planes += np.sum(pump_flux(planes, pump.photon_energy), axis=(-2, -1)) * grid.dx * grid.dy * grid.dtau
        rates = IncoherentRates(J_pump, zero_omega, table, scheme)

        weight = np.real(up).sum(axis=0) * n
        if weight.sum() > 0:
            widths = 0.5 * (rates.gamma[..., scheme.upper].mean(axis=-1) + rates.gamma[..., scheme.lower].mean(axis=-1))
            gamma_dec[step] = np.sum(widths * weight) / weight.sum()

        rho, rho_ground, rho_aux = rk4_step(rho, rho_ground, rho_aux, None, None, rates, grid.dtau, scheme)
        ground[step + 1] = np.real(rho_ground)

    if not config['physics']['field_absorption']:
        mu_omega = None
    return PopulationHistory(grid, n, rho_up, rho_low, ground, mu_omega, gamma_dec, pump_planes)


def run_oracle(config, history=None, decay='rk4'):
    '''
        Full oracle for a config: J matrices at the probe planes, smoothed
        flux map at the exit, photon number vs z and the exit spectrum. All
        arrays use the one-step lag of the solver (``discrete=True``) so they
        compare directly with the ensemble estimators.

        :returns: ``dict`` of name to ``array`` (or ``float``)

    '''
    scheme, table = config.atomic_model()
    history = pump_only_history(config, scheme, table) if history is None else history
    grid = history.grid
    gamma = effective_gamma(grid, scheme.gamma_rad)
    mask = None
    if config['physics']['spectral_mask']:
        mask = spectral_mask(grid, config['physics']['mask_fraction'])
    green = GreenFunction(Propagator(grid, mask=mask), grid.nz - 1)
    n_smooth = config['run']['n_smooth']
    kw = dict(mu=history.mu, decay=decay, discrete=True)

    planes = config.probe_planes()
    J = np.stack([analytic_J_matrix(history.rho_up, history.n, history.gamma_dec, grid, green, p, gamma,
                                    n_smooth=n_smooth, **kw) for p in planes])
    photons = oracle_photon_number(history.rho_up, history.n, history.gamma_dec, grid, green, gamma, n_smooth, **kw)
    flux = oracle_flux_map(history.rho_up, history.n, history.gamma_dec, grid, green, grid.nz, gamma, n_smooth, **kw)
    spectrum = analytic_spectrum(J[-1, 0], grid.dtau, gamma_dec=scheme.gamma_dec)
    return dict(
        oracle_correlation_J=J,
        oracle_photon_number_vs_z=photons,
        oracle_photon_flux=flux,
        oracle_spectrum=np.stack([spectrum['omega'], spectrum['spectrum']]),
        oracle_hwhm=spectrum['hwhm'],
        oracle_rho_up=history.rho_up.mean(axis=(-2, -1)),
        oracle_gamma_dec=history.gamma_dec,
        oracle_pump_photons=history.pump_planes,
        oracle_flux_norm=flux_normalization(grid.wavelength, scheme.gamma_rad),
    )
