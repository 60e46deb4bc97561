import pytest
import h5py
import numpy as np

from sfxflow.config import RunConfig
from sfxflow.observables import gain_coefficient
from sfxflow.physics import (GridSpec, Propagator, OpticalField, make_kernels, sf_slice_step, hermitian_sources,
                             propagate_pump, pump_flux, beer_lambert_photons, build_pump_initial, gaussian_beam_width,
                             seed_pulse, spectral_mask, effective_gamma, effective_inversion, rk4_step)


def _random_hermitian(shape, n, rng):
    a = rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n))
    return 0.1 * (a + np.conj(np.swapaxes(a, -1, -2)))


def test_gaussian_beam():
    wavelength, w0 = 0.15406, 20.
    z_R = np.pi * w0**2 / wavelength
    assert z_R == pytest.approx(8157., rel=1e-3)
    n_steps = 4
    grid = GridSpec(nx=128, ny=128, nz=n_steps, ntau=2, dx=3.125, dy=3.125, dz=2 * z_R / n_steps, dtau=1.,
                    wavelength=wavelength)
    propagator = Propagator(grid)
    r2 = grid.x[:, None]**2 + grid.y[None, :]**2
    field = np.exp(-r2 / w0**2).astype(complex)
    for _ in range(n_steps):
        field = propagator.step(field)
    intensity = np.abs(field)**2
    x2 = np.sum(grid.x[:, None]**2 * intensity) / np.sum(intensity)
    assert 2 * np.sqrt(x2) == pytest.approx(w0 * np.sqrt(5), rel=0.01)
    assert gaussian_beam_width(w0, 2 * z_R, wavelength) == pytest.approx(w0 * np.sqrt(5))


def test_free_propagation_is_unitary(grid):
    rng = np.random.default_rng(0)
    field = rng.normal(size=(2, grid.nx, grid.ny)) + 1j * rng.normal(size=(2, grid.nx, grid.ny))
    out = Propagator(grid).step(field)
    assert np.sum(np.abs(out)**2) == pytest.approx(np.sum(np.abs(field)**2), rel=1e-12)
    masked = Propagator(grid, mask=spectral_mask(grid, 0.5)).step(field)
    assert np.sum(np.abs(masked)**2) < np.sum(np.abs(field)**2)


def test_kernels(grid):
    G, K = make_kernels(grid, 2e-4, None, grid.dz)
    assert abs(G - np.exp(-1e-4 * grid.dz)) < 1e-12
    assert np.allclose(np.abs(K), 1)
    assert K[0, 0] == 1
    G, _ = make_kernels(grid, None, 1e-7, grid.dz)
    assert abs(G[0]) == pytest.approx(1)
    assert np.angle(G[0]) == pytest.approx(-1e-7 * grid.k0 * grid.dz)
    with pytest.raises(ValueError):
        make_kernels(grid, np.array([1e-4, -1e-6]), None, grid.dz)


def test_conjugate_pair(grid, cu):
    scheme, _ = cu
    rng = np.random.default_rng(5)
    propagator = Propagator(grid, mask=spectral_mask(grid))
    shape = (2, grid.nx, grid.ny)
    plus = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    fields = (plus, np.conj(plus), np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex))
    rho = _random_hermitian((grid.nx, grid.ny), 6, rng)
    n = np.full((grid.nx, grid.ny), 0.1)
    G = propagator.absorption(np.full(shape, 1e-4))
    for _ in range(40):
        fields = sf_slice_step(fields, rho, n, None, None, np.ones(shape), None, propagator, G, 1e-3, scheme)
    assert np.allclose(fields[1], np.conj(fields[0]), rtol=0, atol=1e-12 * np.abs(fields[0]).max())
    assert np.all(fields[2] == 0)


def test_drift_gauge_sources(cu):
    scheme, _ = cu
    rng = np.random.default_rng(6)
    P_plus = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    P_minus = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    mask = np.array([[True, False, True]] * 2)
    sym_plus, sym_minus = hermitian_sources(P_plus, P_minus, mask)
    assert np.allclose(sym_minus[mask], np.conj(sym_plus[mask]))
    assert np.array_equal(sym_plus[~mask], P_plus[~mask])
    assert np.array_equal(sym_minus[~mask], P_minus[~mask])
    unchanged = hermitian_sources(P_plus, P_minus, None)
    assert unchanged[0] is P_plus and unchanged[1] is P_minus


def test_noise_sources(grid, cu):
    scheme, _ = cu
    shape = (2, grid.nx, grid.ny)
    zero = np.zeros(shape, dtype=complex)
    xi = np.ones(shape, dtype=complex)
    scale = np.full(shape, 0.5)
    out = sf_slice_step((zero, zero, zero, zero), np.zeros((grid.nx, grid.ny, 6, 6)), np.ones((grid.nx, grid.ny)),
                        xi, 1j * xi, scale, None, Propagator(grid), None, 1e-3, scheme)
    assert np.allclose(out[2], 1j)
    assert np.allclose(out[3], 1.)
    assert np.all(out[0] == 0)


class _FrozenPopulations(object):
    ''' Coherences decay at ``gamma_dec``, populations stay put '''

    def __init__(self, scheme):
        self.decay = np.zeros((scheme.n_levels, scheme.n_levels))
        self.decay[scheme.upper, scheme.lower] = scheme.gamma_dec
        self.decay[scheme.lower, scheme.upper] = scheme.gamma_dec

    def derivative(self, rho, rho_ground, rho_aux):
        return -self.decay * rho, np.zeros_like(rho_ground), np.zeros_like(rho_aux)


def _gain_grid():
    return GridSpec(nx=4, ny=4, nz=20, ntau=80, dx=20., dy=20., dz=500., dtau=0.1, wavelength=0.15406)


def _inverted(scheme, grid):
    rho = np.zeros((grid.nx, grid.ny, scheme.n_levels, scheme.n_levels), dtype=complex)
    idx = np.arange(scheme.n_upper)
    rho[:, :, idx, idx] = 1 / scheme.n_upper
    return rho


def _cw_march(scheme, grid, plus, minus, n, drift_mask=None):
    '''
        Send a constant seed through a medium with frozen inverted
        populations; returns ``(plus, minus)`` at every plane for the last
        τ node, shape ``(nz + 1, 2, nx, ny)``

    '''
    propagator = Propagator(grid)
    gamma = effective_gamma(grid, scheme.gamma_rad)
    rates = _FrozenPopulations(scheme)
    rho = np.repeat(_inverted(scheme, grid)[None], grid.nz, axis=0)
    aux = np.zeros((grid.nx, grid.ny))
    zero = np.zeros_like(plus)
    n_slice = np.full((grid.nx, grid.ny), n)
    scale = np.ones(plus.shape)
    for _ in range(grid.ntau):
        fields = (plus, minus, zero, zero)
        planes = [fields[:2]]
        for z in range(grid.nz):
            after = sf_slice_step(fields, rho[z], n_slice, None, None, scale, drift_mask, propagator, None,
                                  gamma, scheme)
            rho[z] = rk4_step(rho[z], aux, aux, fields[0], fields[1], rates, grid.dtau, scheme)[0]
            fields = after
            planes.append(fields[:2])
    return np.array([p for p, _ in planes]), np.array([m for _, m in planes])


def _density_for_gain(scheme, grid, gain_per_slice):
    up, low = effective_inversion(_inverted(scheme, grid), scheme)
    g = gain_coefficient(up, low, 1., scheme.gamma_dec, grid.wavelength, scheme.gamma_rad)
    return gain_per_slice / (g[1, 0, 0] * grid.dz)


def test_seeded_gain(cu):
    scheme, _ = cu
    grid = _gain_grid()
    n = _density_for_gain(scheme, grid, 0.02)
    plus = np.zeros((2, grid.nx, grid.ny), dtype=complex)
    plus[1] = 1e-3
    P, _ = _cw_march(scheme, grid, plus, np.conj(plus), n)

    intensity = np.mean(np.abs(P[:, 1])**2, axis=(-2, -1))
    z = np.arange(grid.nz + 1) * grid.dz
    slope = np.polyfit(z, np.log(intensity), 1)[0]
    up, low = effective_inversion(_inverted(scheme, grid), scheme)
    g = gain_coefficient(up, low, n, scheme.gamma_dec, grid.wavelength, scheme.gamma_rad)[1, 0, 0]
    assert slope == pytest.approx(2 * g, rel=0.1)
    assert np.all(np.diff(intensity) > 0)


def test_drift_gauge_suppresses_antisymmetric_growth(cu):
    scheme, _ = cu
    grid = _gain_grid()
    n = _density_for_gain(scheme, grid, 0.02)
    rng = np.random.default_rng(7)
    shape = (2, 1, 1)
    plus = np.broadcast_to(1e-3 * (rng.normal(size=shape) + 1j * rng.normal(size=shape)), (2, grid.nx, grid.ny))
    kick = np.broadcast_to(3e-4 * (rng.normal(size=shape) + 1j * rng.normal(size=shape)), plus.shape)
    minus = np.conj(plus) + kick

    def norms(P, M):
        return (np.sqrt(np.sum(np.abs(P + np.conj(M))**2, axis=(1, 2, 3))),
                np.sqrt(np.sum(np.abs(P - np.conj(M))**2, axis=(1, 2, 3))))

    mask = np.ones(plus.shape, dtype=bool)
    symmetric, antisymmetric = norms(*_cw_march(scheme, grid, plus.copy(), minus.copy(), n, drift_mask=mask))
    ratio = antisymmetric / symmetric
    assert np.all(np.diff(ratio) <= 0)
    assert symmetric[-1] > 1.3 * symmetric[0]
    assert np.allclose(antisymmetric, antisymmetric[0], rtol=1e-4)

    symmetric, antisymmetric = norms(*_cw_march(scheme, grid, plus.copy(), minus.copy(), n))
    assert antisymmetric[-1] > 1.3 * antisymmetric[0]


def test_beer_lambert(grid):
    mu = 1e-4
    boundary = np.full((grid.nx, grid.ny), 3e9 + 0j)
    planes = propagate_pump(boundary, np.full(grid.voxel_shape, mu), Propagator(grid))
    assert planes.shape == grid.plane_shape
    photons = pump_flux(planes, 9.).sum(axis=(-2, -1))
    assert np.allclose(photons / photons[0], beer_lambert_photons(1., mu, grid.z_planes), rtol=1e-10)


def test_pump_photon_count():
    grid = RunConfig().grid_spec()
    pump = build_pump_initial(grid, 250., 9., 200., 200., 11.7, 15.)
    assert pump.photons == pytest.approx(1.734e11, rel=1e-3)
    assert pump.discrete_photons(grid) == pytest.approx(1.734e11, rel=5e-3)
    assert np.argmax(pump.envelope) == grid.tau_index(15.)
    assert pump.flux(grid.tau_index(15.)).max() == pytest.approx(
        np.max(pump_flux(pump.boundary(grid.tau_index(15.)), 9.)))

    empty = build_pump_initial(grid, 0., 9., 200., 200., 11.7, 15.)
    assert empty.discrete_photons(grid) == 0


def test_seed_pulse(grid, tmp_path):
    assert seed_pulse(grid) is None
    with pytest.raises(ValueError):
        seed_pulse(grid, amplitude=0.1, polarization=0)

    seed = seed_pulse(grid, amplitude=0.1, polarization=-1, delay=grid.tau[4], fwhm_x=40., fwhm_y=40., fwhm_t=2.)
    plus, minus = seed.boundary(4)
    cx, cy = grid.center
    assert plus[0, cx, cy] == pytest.approx(0.1)
    assert np.all(plus[1] == 0)
    assert np.array_equal(minus, np.conj(plus))

    path = str(tmp_path / 'seed.h5')
    data = np.ones((grid.ntau, 2, grid.nx, grid.ny), dtype=complex)
    with h5py.File(path, 'w') as f:
        f['seed'] = data
        f['short'] = data[:-1]
    assert np.array_equal(seed_pulse(grid, seed_file=path).omega_plus, data)
    with pytest.raises(ValueError):
        seed_pulse(grid, seed_file=path, seed_dataset='short')
    with pytest.raises(RuntimeError):
        seed_pulse(grid, seed_file=path, seed_dataset='missing')


def test_optical_field(grid):
    field = OpticalField.zeros(grid)
    assert field.det_plus.shape == (2,) + grid.plane_shape
    values = tuple(np.full((2, grid.nx, grid.ny), i + 1, dtype=complex) for i in range(4))
    field.set_plane(2, values)
    assert np.all(field.plus[:, 2] == 4)
    assert np.all(field.minus[:, 2] == 6)
    assert np.all(field.plus[:, 1] == 0)
