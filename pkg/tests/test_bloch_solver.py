import pytest
import numpy as np

from sfxflow.physics import (LevelScheme, CrossSectionTable, IncoherentRates, rk4_step, unitary_rhs,
                             noise_increment, divergence_mask, bloch_vector, coupling_matrices)
from sfxflow.physics import bloch_solver


@pytest.fixture
def two_level():
    T = np.zeros((2, 1, 1))
    T[0, 0, 0] = 1.
    scheme = LevelScheme(('u',), ('l',), T, np.zeros((1, 1)), 0., [1e-12, 1e-12])
    table = CrossSectionTable(np.zeros((3, 3)), np.zeros((3, 2)), np.zeros(3), np.zeros(3))
    return scheme, table


def _random_hermitian(shape, n, rng):
    a = rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n))
    return 0.05 * (a + np.conj(np.swapaxes(a, -1, -2)))


def test_rabi_oscillation(two_level):
    scheme, table = two_level
    omega = 0.5
    rates = IncoherentRates(0., np.zeros(2), table, scheme)
    rho = np.zeros((1, 2, 2), dtype=complex)
    rho[0, 0, 0] = 1.
    ground = np.zeros(1, dtype=complex)
    aux = np.zeros(1, dtype=complex)
    omega_plus = np.zeros((2, 1), dtype=complex)
    omega_plus[0] = omega
    omega_minus = np.conj(omega_plus)

    steps = 1000
    dtau = (np.pi / omega) / steps
    for step in range(1, steps + 1):
        rho, ground, aux = rk4_step(rho, ground, aux, omega_plus, omega_minus, rates, dtau, scheme)
        assert rho[0, 0, 0].real == pytest.approx(np.cos(omega * step * dtau)**2, abs=1e-6)
    assert np.trace(rho[0]).real == pytest.approx(1., abs=1e-9)


def test_coherence_decay(cu):
    scheme, table = cu
    rates = IncoherentRates(0., np.zeros(2), table, scheme)
    rho = np.zeros((1, 6, 6), dtype=complex)
    rho[0, 0, 2] = 1.
    ground = np.zeros(1, dtype=complex)
    aux = np.zeros(1, dtype=complex)
    dtau, steps = 0.01, 100
    for _ in range(steps):
        rho, ground, aux = rk4_step(rho, ground, aux, None, None, rates, dtau, scheme)
    assert abs(rho[0, 0, 2] - np.exp(-1.58 * dtau * steps)) < 1e-8
    assert np.count_nonzero(rho) == 1


def test_zero_rhs_is_exact(cu):
    scheme, table = cu
    rates = IncoherentRates(np.zeros(4), np.zeros((2, 4)), table, scheme)
    rho = np.zeros((4, 6, 6), dtype=complex)
    ground = np.ones(4, dtype=complex)
    aux = np.zeros(4, dtype=complex)
    new_rho, new_ground, new_aux = rk4_step(rho, ground, aux, None, None, rates, 0.2, scheme)
    assert np.array_equal(new_rho, rho)
    assert np.array_equal(new_ground, ground)
    assert np.array_equal(new_aux, aux)


def test_hermitian_update(cu):
    scheme, table = cu
    rng = np.random.default_rng(3)
    rho = _random_hermitian((5,), 6, rng)
    omega_plus = rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))
    rates = IncoherentRates(1e4 * np.ones(5), np.ones((2, 5)), table, scheme)
    new_rho, _, _ = rk4_step(rho, np.ones(5, dtype=complex), np.zeros(5, dtype=complex), omega_plus,
                             np.conj(omega_plus), rates, 0.1, scheme)
    assert np.allclose(new_rho, np.conj(np.swapaxes(new_rho, -1, -2)), atol=1e-14)


def test_detuning_phase():
    T = np.ones((2, 1, 1))
    scheme = LevelScheme(('u',), ('l',), T, np.zeros((1, 1)), 0., [1., 1.], energies=[0.3, 0.])
    rho = np.array([[0., 1.], [0., 0.]], dtype=complex)
    drho = unitary_rhs(rho, None, None, scheme)
    assert drho[0, 1] == pytest.approx(-0.3j)


def test_coupling_matrices(cu):
    scheme, _ = cu
    V_plus, V_minus = coupling_matrices(scheme)
    assert np.allclose(V_minus, np.conj(np.swapaxes(V_plus, -1, -2)))
    assert np.all(V_plus[:, scheme.lower] == 0)


def test_zero_noise_increment(cu):
    scheme, _ = cu
    rng = np.random.default_rng(1)
    rho = _random_hermitian((3,), 6, rng)
    xi = np.zeros((2, 3), dtype=complex)
    g = np.ones((2, 3), dtype=complex)
    d = noise_increment(rho, None, None, xi, xi, g, 1e-3, 0.2, scheme)
    assert np.all(d == 0)


def test_noise_increment_structure(cu):
    scheme, _ = cu
    rho = np.zeros((1, 6, 6), dtype=complex)
    rho[0, 0, 0] = rho[0, 1, 1] = 0.5
    rng = np.random.default_rng(2)
    xi_plus = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
    xi_minus = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
    g = np.ones((2, 1), dtype=complex)
    d = noise_increment(rho, None, None, xi_plus, xi_minus, g, 1e-3, 0.2, scheme)
    # populated upper levels only seed upper-lower coherences
    assert np.all(np.diagonal(d, axis1=-2, axis2=-1) == 0)
    assert np.all(d[0, :2, :2] == 0)
    assert np.all(d[0, 2:, 2:] == 0)
    assert np.any(d[0, 2:, :2] != 0)
    assert np.any(d[0, :2, 2:] != 0)

    # linear in the atomic noise amplitude
    d4 = noise_increment(rho, None, None, xi_plus, xi_minus, 4 * g, 1e-3, 0.2, scheme)
    assert np.allclose(d4, d / 2)


def test_quadratic_noise_flag(cu, monkeypatch):
    scheme, _ = cu
    monkeypatch.setattr(bloch_solver, 'QUADRATIC_NOISE', True)
    xi = np.zeros((2, 1), dtype=complex)
    with pytest.raises(NotImplementedError):
        noise_increment(np.zeros((1, 6, 6), dtype=complex), None, None, xi, xi, np.ones((2, 1)), 1e-3, 0.2,
                        scheme)


def test_divergence_mask():
    rho = np.zeros((4, 2, 2), dtype=complex)
    rho[1, 0, 1] = 2e3
    rho[2, 1, 1] = np.nan
    rho[3, 0, 0] = 999.
    assert list(divergence_mask(rho, 1e3)) == [False, True, True, False]


def test_bloch_vector():
    rho = np.zeros((6, 6), dtype=complex)
    rho[0, 0] = 1.
    assert np.allclose(bloch_vector(rho, 0, 2), [0, 0, 1])
    rho[0, 2] = rho[2, 0] = 0.5
    assert np.allclose(bloch_vector(rho, 0, 2), [1, 0, 1])
