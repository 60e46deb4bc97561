'''
    Four-dimensional discretization ``(x, y, z, τ)`` in the retarded frame.

    Arrays are indexed ``[..., z, x, y]`` for per-voxel data and
    ``[..., plane, x, y]`` for fields, where plane ``0`` is the entrance
    boundary and plane ``nz`` the exit. Physical time ``t = τ + z/c`` is never
    formed.

'''
import numpy as np


#: largest prime factor allowed in the transverse node counts
MAX_PRIME_FACTOR = 7


def largest_prime_factor(n):
    factor, largest = 2, 1
    while n > 1 and factor * factor <= n:
        while n % factor == 0:
            largest, n = factor, n // factor
        factor += 1
    return max(largest, n)


class GridSpec(object):
    '''
        Immutable grid description.

        :param nx, ny: ``int``, transverse node counts (>= 2, no prime factor above ``MAX_PRIME_FACTOR``)

        :param nz: ``int``, number of z slices (>= 2)

        :param ntau: ``int``, number of τ nodes (>= 2)

        :param dx, dy, dz: ``float``, steps in nm

        :param dtau: ``float``, τ step in fs

        :param wavelength: ``float``, carrier wavelength λ₀ in nm

        :param window_start: ``float``, τ of the first node in fs (default 0)

    '''

    def __init__(self, nx, ny, nz, ntau, dx, dy, dz, dtau, wavelength, window_start=0.):
        for name, val in (('nx', nx), ('ny', ny), ('nz', nz), ('ntau', ntau)):
            if int(val) != val or val < 2:
                raise ValueError(f'{name} must be an integer >= 2, got {val}')
        for name, val in (('dx', dx), ('dy', dy), ('dz', dz), ('dtau', dtau), ('wavelength', wavelength)):
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f'{name} must be positive, got {val}')
        self.nx, self.ny, self.nz, self.ntau = int(nx), int(ny), int(nz), int(ntau)
        self.dx, self.dy, self.dz, self.dtau = float(dx), float(dy), float(dz), float(dtau)
        self.wavelength = float(wavelength)
        self.window_start = float(window_start)
        for name, n in (('nx', self.nx), ('ny', self.ny)):
            if largest_prime_factor(n) > MAX_PRIME_FACTOR:
                raise ValueError(f'{name}={n} has a prime factor above {MAX_PRIME_FACTOR}, use a 2-3-5-7 smooth size')

    def __repr__(self):
        return (f'GridSpec(nx={self.nx}, ny={self.ny}, nz={self.nz}, ntau={self.ntau}, '
                f'dx={self.dx:g}, dy={self.dy:g}, dz={self.dz:g}, dtau={self.dtau:g}, '
                f'wavelength={self.wavelength:g}, window_start={self.window_start:g})')

    def __eq__(self, other):
        return isinstance(other, GridSpec) and self.attrs() == other.attrs()

    @property
    def k0(self):
        ''' Carrier wavenumber in nm^-1 '''
        return 2 * np.pi / self.wavelength

    @property
    def dV(self):
        return self.dx * self.dy * self.dz

    @property
    def voxel_shape(self):
        return (self.nz, self.nx, self.ny)

    @property
    def plane_shape(self):
        return (self.nz + 1, self.nx, self.ny)

    @property
    def volume(self):
        return self.dV * self.nx * self.ny * self.nz

    @property
    def x(self):
        ''' Transverse coordinates in nm, zero at index ``nx // 2`` '''
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self):
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def z_planes(self):
        return np.arange(self.nz + 1) * self.dz

    @property
    def z_slices(self):
        ''' Slice centres in nm '''
        return (np.arange(self.nz) + 0.5) * self.dz

    @property
    def tau(self):
        return self.window_start + np.arange(self.ntau) * self.dtau

    @property
    def window(self):
        return self.ntau * self.dtau

    @property
    def center(self):
        return (self.nx // 2, self.ny // 2)

    def tau_index(self, tau):
        '''
            Nearest τ node index

            :param tau: ``float`` or ``array`` in fs

            :returns: ``int`` or ``array`` of ``int``

        '''
        tau = np.asarray(tau, dtype=float)
        lo, hi = self.window_start, self.window_start + (self.ntau - 1) * self.dtau
        if np.any(tau < lo - 0.5 * self.dtau) or np.any(tau > hi + 0.5 * self.dtau):
            raise ValueError(f'tau {tau} outside simulated window [{lo:g}, {hi:g}] fs')
        idx = np.clip(np.rint((tau - lo) / self.dtau).astype(int), 0, self.ntau - 1)
        return int(idx) if idx.ndim == 0 else idx

    def attrs(self):
        ''' Grid metadata as a flat ``dict`` for file attributes '''
        return dict(nx=self.nx, ny=self.ny, nz=self.nz, ntau=self.ntau,
                    dx=self.dx, dy=self.dy, dz=self.dz, dtau=self.dtau,
                    wavelength=self.wavelength, window_start=self.window_start)

    @classmethod
    def from_attrs(cls, attrs):
        return cls(**dict((key, attrs[key]) for key in (
            'nx', 'ny', 'nz', 'ntau', 'dx', 'dy', 'dz', 'dtau', 'wavelength', 'window_start')))


class EffectiveRates(object):
    '''
        Grid-derived radiative constants.

         - ``gamma``: paraxial radiative rate ``(3/8π)(λ₀²/ΔxΔy)Γ_rad`` in fs^-1
         - ``solid_angle``: ``λ₀²/(ΔxΔy)``
         - ``dV``: voxel volume in nm^3

    '''

    def __init__(self, grid, gamma_rad):
        self.solid_angle = grid.wavelength**2 / (grid.dx * grid.dy)
        self.gamma = effective_gamma(grid, gamma_rad)
        self.dV = grid.dV

    def __repr__(self):
        return f'EffectiveRates(gamma={self.gamma:g}, solid_angle={self.solid_angle:g}, dV={self.dV:g})'


def effective_gamma(grid, gamma_rad):
    return 3 / (8 * np.pi) * grid.wavelength**2 / (grid.dx * grid.dy) * gamma_rad


def flux_normalization(wavelength, gamma_rad):
    ''' ``(3/8π)λ₀²Γ_rad``, converts ``Ω⁺Ω⁻`` (fs^-2) into photon flux (nm^-2 fs^-1) '''
    return 3 / (8 * np.pi) * wavelength**2 * gamma_rad


def _wavenumbers(n, d):
    k = 2 * np.pi * np.fft.fftfreq(n, d=d)
    if n % 2 == 0:
        k[n // 2] = np.pi / d
    return k


def transverse_wavenumbers(grid):
    '''
        DFT-ordered transverse wavenumbers, zero first. The Nyquist entry of
        an even axis is ``+π/Δ``.

        :returns: ``(kx, ky)`` in nm^-1

    '''
    return _wavenumbers(grid.nx, grid.dx), _wavenumbers(grid.ny, grid.dy)


def spectral_mask(grid, fraction=0.1):
    '''
        Cosine taper over the outer ``fraction`` of the transverse spectral
        radius ``|k|/k_max`` with ``k_max = π/max(Δx, Δy)``. Modes inside
        ``(1 - fraction) k_max`` are multiplied by exactly 1.

        :returns: ``array`` shape ``(nx, ny)``

    '''
    kx, ky = transverse_wavenumbers(grid)
    k_max = np.pi / max(grid.dx, grid.dy)
    r = np.sqrt(kx[:, None]**2 + ky[None, :]**2) / k_max
    if fraction <= 0:
        return np.where(r <= 1, 1., 0.)
    edge = 1 - fraction
    taper = 0.5 * (1 + np.cos(np.pi * (r - edge) / fraction))
    return np.where(r <= edge, 1., np.where(r < 1, taper, 0.))


def number_density(grid, concentration_density, profile='uniform', profile_fwhm=None):
    '''
        Copper number density on the voxel grid

        :param concentration_density: ``float``, peak density in nm^-3

        :param profile: ``'uniform'`` or ``'gaussian'`` (transverse)

        :param profile_fwhm: ``float``, transverse FWHM in nm for the gaussian profile

        :returns: ``array`` shape ``(nz, nx, ny)``

    '''
    n = np.full(grid.voxel_shape, float(concentration_density))
    if profile == 'gaussian':
        sigma = profile_fwhm / (2 * np.sqrt(2 * np.log(2)))
        r2 = grid.x[:, None]**2 + grid.y[None, :]**2
        n = n * np.exp(-r2 / (2 * sigma**2))[None]
    elif profile != 'uniform':
        raise ValueError(f'unknown density profile {profile}')
    return n
