import pytest
import numpy as np

from sfxflow.config import RunConfig
from sfxflow.physics import (GridSpec, EffectiveRates, effective_gamma, flux_normalization, transverse_wavenumbers,
                             spectral_mask, number_density, largest_prime_factor)


def test_default_steps():
    grid = RunConfig().grid_spec()
    assert grid.dx == pytest.approx(900. / 64)
    assert grid.dz == pytest.approx(270e3 / 40)
    assert grid.dtau == pytest.approx(37. / 180)
    assert grid.voxel_shape == (40, 64, 64)
    assert grid.plane_shape == (41, 64, 64)


@pytest.mark.parametrize('kwargs', [
    dict(nx=1), dict(nz=2.5), dict(dx=0.), dict(dtau=-1.), dict(wavelength=np.inf), dict(nx=22), dict(ny=13)
])
def test_invalid_grid(kwargs):
    params = dict(nx=4, ny=4, nz=4, ntau=4, dx=1., dy=1., dz=1., dtau=1., wavelength=0.15)
    params.update(kwargs)
    with pytest.raises(ValueError):
        GridSpec(**params)


def test_transverse_sizes():
    assert [largest_prime_factor(n) for n in (2, 12, 64, 98, 22, 127)] == [2, 3, 2, 7, 11, 127]
    grid = GridSpec(nx=14, ny=30, nz=4, ntau=4, dx=1., dy=1., dz=1., dtau=1., wavelength=0.15)
    assert (grid.nx, grid.ny) == (14, 30)


def test_gamma_voxel_identity(grid):
    # γΔV depends only on Δz
    gamma_rad = 0.88
    lhs = effective_gamma(grid, gamma_rad) * grid.dV
    assert lhs == pytest.approx(3 / (8 * np.pi) * grid.wavelength**2 * gamma_rad * grid.dz, rel=1e-12)
    assert flux_normalization(grid.wavelength, gamma_rad) * grid.dz == pytest.approx(lhs, rel=1e-12)

    rates = EffectiveRates(grid, gamma_rad)
    assert rates.solid_angle == pytest.approx(grid.wavelength**2 / (grid.dx * grid.dy))
    assert rates.gamma == pytest.approx(effective_gamma(grid, gamma_rad))


def test_transverse_wavenumbers(grid):
    kx, ky = transverse_wavenumbers(grid)
    assert kx[0] == 0
    assert np.abs(kx).max() == pytest.approx(np.pi / grid.dx)
    assert kx[grid.nx // 2] > 0
    assert np.allclose(kx[1:grid.nx // 2], 2 * np.pi * np.arange(1, grid.nx // 2) / (grid.nx * grid.dx))


def test_spectral_mask(grid):
    mask = spectral_mask(grid, fraction=0.1)
    kx, ky = transverse_wavenumbers(grid)
    r = np.sqrt(kx[:, None]**2 + ky[None, :]**2) / (np.pi / grid.dx)
    assert np.all(mask[r <= 0.9] == 1.)
    assert np.all((mask >= 0) & (mask <= 1))
    assert np.all(mask[r >= 1] == 0.)


def test_tau_index(grid):
    assert grid.tau_index(grid.tau[3]) == 3
    assert grid.tau_index(grid.tau[3] + 0.2 * grid.dtau) == 3
    assert np.all(grid.tau_index(grid.tau) == np.arange(grid.ntau))
    with pytest.raises(ValueError):
        grid.tau_index(grid.tau[-1] + grid.dtau)
    with pytest.raises(ValueError):
        grid.tau_index(-grid.dtau)


def test_attrs(grid):
    assert GridSpec.from_attrs(grid.attrs()) == grid
    assert GridSpec.from_attrs(dict(grid.attrs(), nx=16)) != grid


def test_number_density(grid):
    n = number_density(grid, 4.8)
    assert n.shape == grid.voxel_shape
    assert np.all(n == 4.8)

    n = number_density(grid, 4.8, profile='gaussian', profile_fwhm=60.)
    cx, cy = grid.center
    assert n[0, cx, cy] == pytest.approx(4.8)
    assert n.max() == n[0, cx, cy]
    # half maximum at x = fwhm / 2
    assert n[0, cx + 1, cy] == pytest.approx(4.8 * 0.5**((2 * grid.dx / 60.)**2))

    with pytest.raises(ValueError):
        number_density(grid, 4.8, profile='flat')
