import pytest
import numpy as np

from sfxflow.physics import flux_normalization
from sfxflow.observables import (photon_flux, pair_average, smooth_diagonal, correlation_J, BandCorrelation,
                                 smoothed_products, spectral_angular, wigner, transform_limited_spectrum,
                                 transverse_correlation, correlation_width, stokes, shift_range, stokes_pair_products,
                                 polarization_correlation, gain_coefficient)

GAMMA_RAD = 0.88
WAVELENGTH = 0.15406


def _complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_photon_flux():
    norm = flux_normalization(WAVELENGTH, GAMMA_RAD)
    assert photon_flux(2., 3., GAMMA_RAD, WAVELENGTH) == pytest.approx(6. / norm)
    assert norm == pytest.approx(3 / (8 * np.pi) * WAVELENGTH**2 * GAMMA_RAD)


def test_smooth_diagonal():
    J = np.arange(16.).reshape(4, 4)
    smoothed = smooth_diagonal(J, 2)
    assert list(np.diag(smoothed)) == [2.5, 7.5, 12.5, 12.5]
    off = ~np.eye(4, dtype=bool)
    assert np.array_equal(smoothed[off], J[off])
    assert J[0, 0] == 0
    assert np.array_equal(smooth_diagonal(J, 1), J)


def test_pair_average():
    rng = np.random.default_rng(0)
    plus, minus = _complex(rng, (6, 2, 3)), _complex(rng, (6, 2, 3))
    raw = pair_average(lambda p, m: p * m, plus, minus, 1)
    assert np.allclose(raw, plus * minus)

    avg = pair_average(lambda p, m: p * m, plus, minus, 3)
    expected = (plus[0] * minus[1] + plus[0] * minus[2] + plus[1] * minus[0] + plus[1] * minus[2]
                + plus[2] * minus[0] + plus[2] * minus[1]) / 6
    assert np.allclose(avg[0], expected)
    # the window is clamped at the end of the record
    assert np.allclose(avg[5], avg[3])
    assert np.allclose(pair_average(lambda p, m: p * m, plus, minus, 3, index=4), avg[4])


def test_band_correlation():
    rng = np.random.default_rng(1)
    ntau = 7
    plus, minus = _complex(rng, (ntau, 2, 3)), _complex(rng, (ntau, 2, 3))
    band = BandCorrelation(ntau, 3, lambda p, m: p * m)
    for step in range(ntau):
        band.update(step, plus[step], minus[step])
    assert band.band.shape == (5, ntau, 2, 3)
    assert np.allclose(band.band[3, 4], plus[4] * minus[5])
    assert np.allclose(band.band[1, 5], plus[5] * minus[4])
    assert np.allclose(band.smoothed(), pair_average(lambda p, m: p * m, plus, minus, 3))
    assert np.allclose(smoothed_products(plus, minus, 1), plus * minus)

    band.reset()
    assert band.band is None


def test_correlation_J(grid):
    rng = np.random.default_rng(2)
    shape = (grid.ntau, 2, grid.nx, grid.ny)
    plus, minus = _complex(rng, shape), _complex(rng, shape)
    norm = flux_normalization(WAVELENGTH, GAMMA_RAD)
    J = correlation_J(plus, minus, GAMMA_RAD, WAVELENGTH, grid.dx, grid.dy, n_smooth=3)
    assert J.shape == (2, grid.ntau, grid.ntau)
    assert J[1, 2, 5] == pytest.approx(np.sum(plus[2, 1] * minus[5, 1]) * grid.dx * grid.dy / norm)

    flux = pair_average(lambda p, m: np.sum(p * m, axis=(-2, -1)), plus, minus, 3)
    assert np.allclose(np.diagonal(J, axis1=1, axis2=2), flux.T * grid.dx * grid.dy / norm)

    J_pix = correlation_J(plus, minus, GAMMA_RAD, WAVELENGTH, grid.dx, grid.dy, integrate=False, n_smooth=3)
    assert J_pix.shape == (2, grid.ntau, grid.ntau, grid.nx, grid.ny)
    assert np.allclose(J_pix.sum(axis=(-2, -1)) * grid.dx * grid.dy, J)


def test_spectral_angular_parseval(grid):
    rng = np.random.default_rng(3)
    plus = _complex(rng, (grid.ntau, 2, grid.nx, grid.ny))
    I, theta_x, theta_y, omega = spectral_angular(plus, np.conj(plus), grid, GAMMA_RAD)
    assert I.shape == (2, grid.nx, grid.ny, grid.ntau)
    assert np.allclose(I.imag, 0)
    c = grid.dx * grid.dy * grid.dtau / (2 * np.pi)**3
    expected = c**2 * grid.nx * grid.ny * grid.ntau * np.sum(np.abs(plus)**2) / flux_normalization(
        WAVELENGTH, GAMMA_RAD)
    assert np.sum(I.real) == pytest.approx(expected, rel=1e-10)


def test_spectral_angular_plane_wave(grid):
    kx = 2 * np.pi * 2 / (grid.nx * grid.dx)
    omega0 = 2 * np.pi * 3 / (grid.ntau * grid.dtau)
    profile = np.exp(-1j * kx * grid.x)[:, None] * np.ones((1, grid.ny))
    plus = np.exp(1j * omega0 * grid.tau)[:, None, None, None] * profile[None, None]
    plus = np.broadcast_to(plus, (grid.ntau, 2, grid.nx, grid.ny))
    I, theta_x, theta_y, omega = spectral_angular(plus, np.conj(plus), grid, GAMMA_RAD)
    ix, iy, iw = np.unravel_index(np.argmax(I[0].real), I[0].shape)
    assert theta_x[ix] == pytest.approx(kx / grid.k0)
    assert theta_y[iy] == pytest.approx(0, abs=1e-12)
    assert omega[iw] == pytest.approx(omega0)


def test_wigner_marginal():
    rng = np.random.default_rng(4)
    ntau, dtau = 10, 0.25
    plus, minus = _complex(rng, (ntau, 3)), _complex(rng, (ntau, 3))
    result = wigner(plus, minus, dtau, GAMMA_RAD, WAVELENGTH)
    assert result['W'].shape == (2 * ntau, ntau, 3)
    assert result['omega'].shape == (2 * ntau,)
    assert np.allclose(result['projection_tau'], photon_flux(plus, minus, GAMMA_RAD, WAVELENGTH))
    assert result['projection_omega'].shape == (2 * ntau, 3)

    smoothed = np.ones((ntau, 3))
    assert np.allclose(wigner(plus, minus, dtau, GAMMA_RAD, WAVELENGTH, smoothed)['projection_tau'], 1)


def test_transform_limited_gaussian():
    ntau, dtau, sigma = 256, 0.1, 0.5
    tau = (np.arange(ntau) - ntau // 2) * dtau
    I_TL, omega, n_clamped = transform_limited_spectrum(np.exp(-tau**2 / (2 * sigma**2)), dtau)
    assert n_clamped == 0
    rms = np.sqrt(np.sum(omega**2 * I_TL) / np.sum(I_TL))
    assert rms == pytest.approx(1 / (2 * sigma), rel=1e-4)
    assert omega[np.argmax(I_TL)] == 0

    noisy = np.exp(-tau**2 / (2 * sigma**2))
    noisy[:3] = -1e-3
    _, _, n_clamped = transform_limited_spectrum(noisy, dtau)
    assert n_clamped == 3


def test_transverse_correlation(grid):
    rng = np.random.default_rng(5)
    plus, minus = _complex(rng, (grid.nx, grid.ny)), _complex(rng, (grid.nx, grid.ny))
    norm = flux_normalization(WAVELENGTH, GAMMA_RAD)
    gamma = transverse_correlation(plus, minus, grid.dx, grid.dy, GAMMA_RAD, WAVELENGTH)
    for d in [(0, 0), (1, 0), (2, 5), (7, 3)]:
        shifted = np.roll(minus, (-d[0], -d[1]), axis=(0, 1))
        assert gamma[d] == pytest.approx(np.sum(plus * shifted) * grid.dx * grid.dy / norm)

    hermitian = transverse_correlation(plus, np.conj(plus), grid.dx, grid.dy, GAMMA_RAD, WAVELENGTH)
    assert hermitian[3, 2] == pytest.approx(np.conj(hermitian[-3, -2]))
    assert hermitian[0, 0] == pytest.approx(np.sum(np.abs(plus)**2) * grid.dx * grid.dy / norm)


def test_correlation_width():
    nx, dx, s = 64, 1., 5.
    d = np.fft.fftfreq(nx, 1 / nx) * dx
    gamma = np.exp(-d**2 / (2 * s**2))[:, None] * np.ones((1, 4))
    assert correlation_width(gamma, dx) == pytest.approx(2 * np.sqrt(2 * np.log(2)) * s, rel=0.02)
    assert correlation_width(np.zeros((8, 8)), dx) == 0


def test_stokes_identity():
    rng = np.random.default_rng(6)
    plus = _complex(rng, (2, 5, 5))
    S = stokes(plus, np.conj(plus), GAMMA_RAD, WAVELENGTH)
    assert S.shape == (4, 5, 5)
    assert np.allclose(S.imag, 0, atol=1e-9 * np.abs(S).max())
    S = S.real
    assert np.allclose(S[0]**2, S[1]**2 + S[2]**2 + S[3]**2)

    # circular polarization +1 only
    circular = np.zeros((2, 1))
    circular[1] = 1.
    S = stokes(circular, circular, GAMMA_RAD, WAVELENGTH)
    assert S[3, 0] == pytest.approx(-S[0, 0])
    assert S[1, 0] == 0


def test_polarization_correlation():
    plus = np.zeros((2, 6, 6), dtype=complex)
    plus[0] = 1.
    plus[1] = 1j
    S = stokes(plus, np.conj(plus), GAMMA_RAD, WAVELENGTH)
    shifts = shift_range(6, 8)
    assert list(shifts) == [-2, -1, 0, 1, 2]
    assert list(shift_range(6, 1)) == [-1, 0, 1]
    products = stokes_pair_products(S, shifts, shifts)
    assert products.shape == (5, 5, 6, 6)
    assert np.allclose(products[2, 2], S[0]**2)
    # fully polarized everywhere: every point contributes 1
    C = polarization_correlation(products, S[0], shifts, shifts)
    assert np.allclose(C, 36)
    assert np.all(polarization_correlation(np.zeros((5, 5, 6, 6)), np.zeros((6, 6)), shifts, shifts) == 0)


def test_polarization_correlation_per_point():
    # dim half with one shared polarization, bright half with independent polarizations per pixel
    rng = np.random.default_rng(12)
    n_samples, nx, ny = 500, 8, 8
    amplitude = np.ones((nx, ny))
    amplitude[nx // 2:] = 10.
    direction = rng.normal(size=(3, n_samples, nx, ny))
    direction[:, :, :nx // 2] = rng.normal(size=(3, n_samples, 1, 1))
    direction /= np.linalg.norm(direction, axis=0)
    S0 = np.broadcast_to(amplitude**2, (n_samples, nx, ny))
    S = np.concatenate([S0[None], amplitude**2 * direction])

    shifts_x, shifts_y = np.array([0, 1]), np.array([0])
    products = stokes_pair_products(S, shifts_x, shifts_y).mean(axis=0)
    C = np.real(polarization_correlation(products, S0.mean(axis=0), shifts_x, shifts_y))
    assert C[0, 0] == pytest.approx(nx * ny)
    # only the 3 x 8 neighbour pairs inside the dim half stay correlated
    assert C[1, 0] / C[0, 0] == pytest.approx(24 / 64, abs=0.03)

    # a zero-intensity pixel is left out instead of dividing by zero
    S0_mean = S0.mean(axis=0).copy()
    S0_mean[0, 0] = 0.
    C = np.real(polarization_correlation(products, S0_mean, shifts_x, shifts_y))
    assert np.all(np.isfinite(C))
    assert C[0, 0] == pytest.approx(nx * ny - 1)



def test_gain_coefficient():
    g = gain_coefficient(0.5, 0.1, 4.8, 1.58, WAVELENGTH, GAMMA_RAD)
    assert g == pytest.approx(3 / (8 * np.pi) * 4.8 * WAVELENGTH**2 * GAMMA_RAD / 1.58 * 0.4)
    assert gain_coefficient(0.1, 0.5, 4.8, 1.58, WAVELENGTH, GAMMA_RAD) < 0
    with pytest.raises(ValueError):
        gain_coefficient(0.5, 0.1, 4.8, 0., WAVELENGTH, GAMMA_RAD)
