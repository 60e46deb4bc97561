'''
    Per-trajectory estimators of the emitted field and the medium.

    Field arguments are the total (deterministic plus noise) positive-P
    amplitudes ``Ω⁺`` and ``Ω⁻``, polarization first. Every bilinear field
    product is divided by ``(3/8π)λ₀²Γ_rad`` so that equal-time values are
    photon fluxes (photons nm^-2 fs^-1). Single-trajectory values are complex
    and only their ensemble means are physical.

    Equal-node products ``Ω⁺(τ)Ω⁻(τ)`` have zero expectation in the
    discretized scheme (coherences reach the field one step after they are
    driven), so every equal-time quantity is formed from neighbouring-node
    pairs: with ``n_smooth`` nodes the value at ``τ`` is the mean of
    ``f(Ω⁺(a), Ω⁻(b))`` over ``a ≠ b`` in ``[τ', τ' + n_smooth - 1]``,
    ``τ' = min(τ, ntau - n_smooth)``.

'''
import logging

import numpy as np

from ..physics.grid_domain import flux_normalization
from ..physics.atomic_model import effective_inversion, polarization_fields
from ..physics.bloch_solver import bloch_vector


def photon_flux(omega_plus, omega_minus, gamma_rad, wavelength):
    '''
        ``I = Ω⁺Ω⁻ / ((3/8π)λ₀²Γ_rad)``

        :returns: complex ``array`` with the broadcast shape of the inputs

    '''
    return omega_plus * omega_minus / flux_normalization(wavelength, gamma_rad)


def _pair_windows(ntau, n_smooth):
    ''' ``(τ, [(a, b), ...])`` for every τ node '''
    ns = min(int(n_smooth), ntau)
    for tau in range(ntau):
        if ns < 2:
            yield tau, [(tau, tau)]
            continue
        start = min(tau, ntau - ns)
        window = range(start, start + ns)
        yield tau, [(a, b) for a in window for b in window if a != b]


def pair_average(func, plus_hist, minus_hist, n_smooth, index=None):
    '''
        Neighbour-pair smoothed equal-time estimator.

        :param func: ``callable(plus, minus)`` bilinear in its arguments

        :param plus_hist, minus_hist: ``array`` shape ``(ntau, ...)``

        :param n_smooth: ``int``, window length in τ nodes (``1`` uses raw equal-node products)

        :param index: ``int`` or ``None``, evaluate only at this τ node

        :returns: ``array`` shape ``(ntau, ...)`` (or ``(...)`` when ``index`` is given)

    '''
    ntau = plus_hist.shape[0]
    out = None
    for tau, pairs in _pair_windows(ntau, n_smooth):
        if index is not None and tau != index:
            continue
        value = sum(func(plus_hist[a], minus_hist[b]) for a, b in pairs) / len(pairs)
        if index is not None:
            return value
        if out is None:
            out = np.zeros((ntau,) + np.shape(value), dtype=np.result_type(value, complex))
        out[tau] = value
    return out


def smooth_diagonal(J, n_smooth):
    '''
        Replace the diagonal of a two-time matrix by its neighbour-pair
        average

        :param J: ``array`` shape ``(..., ntau, ntau)``

        :returns: copy of ``J``

    '''
    J = np.array(J, copy=True)
    ntau = J.shape[-1]
    if n_smooth < 2:
        return J
    diag = np.zeros(J.shape[:-1], dtype=J.dtype)
    for tau, pairs in _pair_windows(ntau, n_smooth):
        a, b = (np.array(idx) for idx in zip(*pairs))
        diag[..., tau] = J[..., a, b].mean(axis=-1)
    idx = np.arange(ntau)
    J[..., idx, idx] = diag
    return J


def correlation_J(plus_hist, minus_hist, gamma_rad, wavelength, dx, dy, integrate=True, n_smooth=None):
    '''
        Two-time correlation ``J_s(τ₁, τ₂) = Ω⁺_s(τ₁)Ω⁻_s(τ₂)/((3/8π)λ₀²Γ_rad)``

        :param plus_hist, minus_hist: ``array`` shape ``(ntau, 2, nx, ny)``

        :param integrate: ``bool``, sum over the transverse plane weighted by ``ΔxΔy`` (photons fs^-1)

        :param n_smooth: ``int`` or ``None``, smooth the diagonal

        :returns: ``array`` shape ``(2, ntau, ntau)`` or ``(2, ntau, ntau, nx, ny)``

    '''
    norm = flux_normalization(wavelength, gamma_rad)
    if integrate:
        J = np.einsum('asxy,bsxy->sab', plus_hist, minus_hist) * dx * dy / norm
    else:
        J = np.einsum('asxy,bsxy->sabxy', plus_hist, minus_hist) / norm
    if n_smooth is not None:
        if integrate:
            J = smooth_diagonal(J, n_smooth)
        else:
            J = np.moveaxis(smooth_diagonal(np.moveaxis(J, (1, 2), (-2, -1)), n_smooth), (-2, -1), (1, 2))
    return J


class BandCorrelation(object):
    '''
        Online store of the near-diagonal band ``P(t, t + L)`` for
        ``|L| < n_smooth`` of a reduced field product, built one τ step at a
        time from a ring buffer of the previous fields.

        :param ntau: ``int``, number of τ nodes

        :param n_smooth: ``int``, band half width plus one

        :param reduce: ``callable(plus, minus)`` returning the reduced product

    '''

    def __init__(self, ntau, n_smooth, reduce):
        self.ntau = int(ntau)
        self.n_smooth = max(min(int(n_smooth), self.ntau), 1)
        self.reduce = reduce
        self.band = None
        self._ring = dict()

    def __repr__(self):
        return f'BandCorrelation(ntau={self.ntau}, n_smooth={self.n_smooth})'

    def reset(self):
        self.band = None
        self._ring = dict()

    def update(self, step, plus, minus):
        '''
            Add the fields of τ node ``step`` (must be called for consecutive steps)

        '''
        width = self.n_smooth - 1
        diag = self.reduce(plus, minus)
        if self.band is None:
            self.band = np.zeros((2 * width + 1, self.ntau) + np.shape(diag), dtype=complex)
        self.band[width, step] = diag
        for k in range(1, width + 1):
            if step - k not in self._ring:
                continue
            prev_plus, prev_minus = self._ring[step - k]
            # L = +k at t = step - k, L = -k at t = step
            self.band[width + k, step - k] = self.reduce(prev_plus, minus)
            self.band[width - k, step] = self.reduce(plus, prev_minus)
        if width > 0:
            self._ring[step] = (plus.copy(), minus.copy())
            self._ring.pop(step - width, None)

    def smoothed(self):
        '''
            Smoothed equal-time value at every node

            :returns: ``array`` shape ``(ntau, ...)``

        '''
        width = self.n_smooth - 1
        if width == 0:
            return self.band[0].copy()
        out = np.zeros(self.band.shape[1:], dtype=complex)
        for tau, pairs in _pair_windows(self.ntau, self.n_smooth):
            out[tau] = sum(self.band[width + b - a, a] for a, b in pairs) / len(pairs)
        return out


def j_band(plus_hist, minus_hist, n_smooth, reduce):
    '''
        Band of ``reduce(Ω⁺(t), Ω⁻(t + L))`` for a stored history, same layout as ``BandCorrelation.band``
    '''
    band = BandCorrelation(plus_hist.shape[0], n_smooth, reduce)
    for step in range(plus_hist.shape[0]):
        band.update(step, plus_hist[step], minus_hist[step])
    return band


def smoothed_products(plus_hist, minus_hist, n_smooth, reduce=None):
    '''
        Smoothed equal-time products ``⟨Ω⁺Ω⁻⟩(τ)`` from a stored history,
        optionally reduced (e.g. summed over the transverse plane)

    '''
    if reduce is None:
        def reduce(a, b):
            return a * b
    return j_band(plus_hist, minus_hist, n_smooth, reduce).smoothed()


def spectral_angular(plus_hist, minus_hist, grid, gamma_rad):
    '''
        Spectral and angular distribution at one plane::

            Ω̄± = Σ ΔxΔyΔτ/(2π)³ Ω± exp(±ik₀(xθx + yθy) ∓ iωτ)

        so that a field ``Ω⁺ ∝ exp(-ik₀θ₀x + iω₀τ)`` (with ``Ω⁻`` its
        conjugate) maps onto ``(θ₀, ω₀)``.

        :param plus_hist, minus_hist: ``array`` shape ``(ntau, 2, nx, ny)``

        :returns: ``(I, theta_x, theta_y, omega)`` with ``I`` shape ``(2, nx, ny, ntau)``
            in fftshifted order

    '''
    c = grid.dx * grid.dy * grid.dtau / (2 * np.pi)**3
    n_xy = grid.nx * grid.ny
    plus = np.moveaxis(plus_hist, 0, -1)
    minus = np.moveaxis(minus_hist, 0, -1)
    bar_plus = c * n_xy * np.fft.ifftn(plus, axes=(-3, -2))
    bar_plus = np.fft.fft(bar_plus, axis=-1)
    bar_minus = c * np.fft.fftn(minus, axes=(-3, -2))
    bar_minus = grid.ntau * np.fft.ifft(bar_minus, axis=-1)
    # ifft over x gives exp(+ikx) with k on the DFT grid
    intensity = np.fft.fftshift(photon_flux(bar_plus, bar_minus, gamma_rad, grid.wavelength), axes=(-3, -2, -1))
    theta_x = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)) / grid.k0
    theta_y = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(grid.ny, grid.dy)) / grid.k0
    # fft over τ gives exp(-iωτ)
    omega = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(grid.ntau, grid.dtau))
    return intensity, theta_x, theta_y, omega


def wigner(plus_series, minus_series, dtau, gamma_rad, wavelength, smoothed_flux=None):
    '''
        Wigner distribution
        ``W(ω, τ) = ∫dτ'/2π Ω⁺(τ + τ'/2)Ω⁻(τ - τ'/2) e^{iωτ'}`` at one point,
        with zero padding outside the window. The τ' grid is ``2mΔτ``.

        :param plus_series, minus_series: ``array`` shape ``(ntau, ...)``

        :param smoothed_flux: ``array`` shape ``(ntau, ...)`` or ``None``, replaces the ``τ' = 0`` term (photon flux units)

        :returns: ``dict`` with ``W`` (shape ``(n_omega, ntau, ...)``, fftshifted in ω), ``omega``,
            ``projection_tau`` (``∫W dω``) and ``projection_omega`` (``∫W dτ``)

    '''
    ntau = plus_series.shape[0]
    n_m = 2 * ntau
    norm = flux_normalization(wavelength, gamma_rad)
    K = np.zeros((n_m,) + plus_series.shape, dtype=complex)
    for tau in range(ntau):
        reach = min(tau, ntau - 1 - tau)
        for m in range(-reach, reach + 1):
            K[m % n_m, tau] = plus_series[tau + m] * minus_series[tau - m] / norm
    if smoothed_flux is not None:
        K[0] = smoothed_flux
    W = 2 * dtau / (2 * np.pi) * n_m * np.fft.ifft(K, axis=0)
    W = np.fft.fftshift(W, axes=0)
    omega = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(n_m, 2 * dtau))
    d_omega = omega[1] - omega[0]
    return dict(W=W, omega=omega, projection_tau=W.sum(axis=0) * d_omega, projection_omega=W.sum(axis=1) * dtau)


def transform_limited_spectrum(intensity, dtau):
    '''
        ``I_TL(ω) = |∫dτ/2π e^{iωτ}√I(τ)|²``. The real part of ``I`` is used;
        negative entries are clamped to zero and counted.

        :param intensity: ``array`` shape ``(ntau,)``

        :returns: ``(I_TL, omega, n_clamped)`` with ``omega`` fftshifted

    '''
    I = np.real(np.asarray(intensity))
    negative = I < 0
    n_clamped = int(np.count_nonzero(negative))
    if n_clamped:
        logging.warning(f'clamped {n_clamped} negative intensity samples to zero')
    I = np.where(negative, 0., I)
    ntau = I.shape[0]
    amplitude = dtau / (2 * np.pi) * ntau * np.fft.ifft(np.sqrt(I), axis=0)
    omega = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(ntau, dtau))
    return np.fft.fftshift(np.abs(amplitude)**2, axes=0), omega, n_clamped


def transverse_correlation(omega_plus, omega_minus, dx, dy, gamma_rad, wavelength):
    '''
        ``Γ(d) = Σ_r' Ω⁺(r')Ω⁻(r' + d) ΔxΔy`` with periodic wrap, in
        photons fs^-1

        :param omega_plus, omega_minus: ``array`` shape ``(..., nx, ny)``

        :returns: ``array`` shape ``(..., nx, ny)`` with ``d = 0`` at index ``(0, 0)``

    '''
    n_xy = omega_plus.shape[-2] * omega_plus.shape[-1]
    spec = np.fft.fft2(omega_minus, axes=(-2, -1)) * n_xy * np.fft.ifft2(omega_plus, axes=(-2, -1))
    gamma = np.fft.ifft2(spec, axes=(-2, -1)) * dx * dy
    return gamma / flux_normalization(wavelength, gamma_rad)


def correlation_width(gamma, dx):
    '''
        Full width at half maximum of ``|Γ|`` along x through ``d = 0``,
        linearly interpolated

        :param gamma: ``array`` shape ``(nx, ny)``, ``d = 0`` at index ``(0, 0)``

        :returns: ``float`` in nm

    '''
    profile = np.abs(np.fft.fftshift(gamma[:, 0]))
    centre = gamma.shape[0] // 2
    half = 0.5 * profile[centre]
    if half == 0:
        return 0.
    edges = list()
    for direction in (1, -1):
        i = centre
        while 0 <= i + direction < profile.size and profile[i + direction] >= half:
            i += direction
        if not 0 <= i + direction < profile.size:
            edges.append(abs(i - centre) * dx)
            continue
        frac = (profile[i] - half) / (profile[i] - profile[i + direction])
        edges.append((abs(i - centre) + frac) * dx)
    return float(sum(edges))


def stokes(omega_plus, omega_minus, gamma_rad, wavelength):
    '''
        Stokes parameters from both polarizations::

            S₀ = I₋₁ + I₊₁
            S₁ = (Ω⁺₊₁Ω⁻₋₁ + Ω⁺₋₁Ω⁻₊₁) / c
            S₂ = i(Ω⁺₊₁Ω⁻₋₁ - Ω⁺₋₁Ω⁻₊₁) / c
            S₃ = I₋₁ - I₊₁

        with ``c = (3/8π)λ₀²Γ_rad``.

        :param omega_plus, omega_minus: ``array`` shape ``(2, ...)``

        :returns: ``array`` shape ``(4, ...)``

    '''
    c = flux_normalization(wavelength, gamma_rad)
    I_m = omega_plus[0] * omega_minus[0] / c
    I_p = omega_plus[1] * omega_minus[1] / c
    cross_pm = omega_plus[1] * omega_minus[0] / c
    cross_mp = omega_plus[0] * omega_minus[1] / c
    return np.stack([I_m + I_p, cross_pm + cross_mp, 1j * (cross_pm - cross_mp), I_m - I_p])


def shift_range(n, max_shift):
    '''
        Transverse shifts ``-w..w`` (pixels) with ``w = min(max_shift, (n - 1) // 2)``
        so that no two shifts wrap onto each other

    '''
    w = min(int(max_shift), (n - 1) // 2)
    return np.arange(-w, w + 1)


def stokes_pair_products(S, shifts_x, shifts_y):
    '''
        Per-point products ``S(r')·S(r' + d)`` of the vector part
        ``(S₁, S₂, S₃)`` with periodic wrap

        :param S: ``array`` shape ``(4, ..., nx, ny)``

        :param shifts_x, shifts_y: ``array`` of ``int`` pixel shifts

        :returns: ``array`` shape ``(..., len(shifts_x), len(shifts_y), nx, ny)``

    '''
    vec = S[1:4]
    out = np.empty(S.shape[1:-2] + (len(shifts_x), len(shifts_y)) + S.shape[-2:], dtype=np.result_type(S, complex))
    for i, dx in enumerate(shifts_x):
        for j, dy in enumerate(shifts_y):
            shifted = np.roll(vec, (-dx, -dy), axis=(-2, -1))
            out[..., i, j, :, :] = np.sum(vec * shifted, axis=0)
    return out


def polarization_correlation(products, S0_mean, shifts_x, shifts_y):
    '''
        ``C(d) = Σ_r' ⟨S(r')·S(r' + d)⟩ / (⟨S₀(r')⟩⟨S₀(r' + d)⟩)``. Points
        where the denominator vanishes are left out of the sum.

        :param products: ensemble mean of ``stokes_pair_products``,
            shape ``(..., len(shifts_x), len(shifts_y), nx, ny)``

        :param S0_mean: ensemble mean of ``S₀``, shape ``(..., nx, ny)``

        :returns: ``array`` shape ``(..., len(shifts_x), len(shifts_y))``, ``d = 0`` at the centre

    '''
    s0 = np.real(S0_mean)
    C = np.zeros(products.shape[:-2], dtype=products.dtype)
    for i, dx in enumerate(shifts_x):
        for j, dy in enumerate(shifts_y):
            denominator = s0 * np.roll(s0, (-dx, -dy), axis=(-2, -1))
            ok = denominator != 0
            ratio = products[..., i, j, :, :] / np.where(ok, denominator, 1.)
            C[..., i, j] = np.sum(np.where(ok, ratio, 0.), axis=(-2, -1))
    return C



def gain_coefficient(rho_up, rho_low, n, gamma_dec, wavelength, gamma_rad):
    '''
        Amplitude gain ``g = (3/8π) n λ₀² (Γ_rad/γ_dec)(ρ_up - ρ_low)``
        (nm^-1); the photon flux of a seeded field grows as ``e^{2gz}``

    '''
    if gamma_dec <= 0:
        raise ValueError(f'coherence decay rate must be positive, got {gamma_dec}')
    return 3 / (8 * np.pi) * n * wavelength**2 * gamma_rad / gamma_dec * np.real(rho_up - rho_low)


__all__ = [
    'photon_flux', 'pair_average', 'smooth_diagonal', 'correlation_J', 'BandCorrelation', 'j_band',
    'smoothed_products', 'spectral_angular', 'wigner', 'transform_limited_spectrum', 'transverse_correlation',
    'correlation_width', 'stokes', 'shift_range', 'stokes_pair_products', 'polarization_correlation',
    'gain_coefficient', 'effective_inversion', 'polarization_fields', 'bloch_vector',
]
