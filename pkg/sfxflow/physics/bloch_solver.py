'''
    Per-voxel integration of the atomic density matrix over one τ step.

    The coherent coupling is written with the per-voxel matrix
    ``H = Σ_s (Ω⁺_s V⁺_s + Ω⁻_s V⁻_s)`` where ``V⁺_s`` holds ``T_{ul,s}`` in
    the upper-lower block and ``V⁻_s`` holds ``T_{lu,s}`` in the lower-upper
    block. Then the unitary part is ``-iΔω∘ρ + i(Hρ - ρH)`` and the atomic
    noise is ``N⁺ρ + ρN⁻`` with ``N⁺ = Σ_s a_s ξ⁺*_s V⁻_s`` and
    ``N⁻ = Σ_s a_s ξ⁻*_s V⁺_s``.

'''
import numpy as np

from .noise_engine import gauge_scales

#: research flag for the noise terms quadratic in the coherences (omitted)
QUADRATIC_NOISE = False


def coupling_matrices(scheme):
    '''
        :returns: ``(V_plus, V_minus)``, each shape ``(2, n, n)``

    '''
    n = scheme.n_levels
    V_plus = np.zeros((2, n, n), dtype=complex)
    V_minus = np.zeros((2, n, n), dtype=complex)
    V_plus[:, scheme.upper, scheme.lower] = scheme.T_ul
    V_minus[:, scheme.lower, scheme.upper] = scheme.T_lu
    return V_plus, V_minus


def _coupling(omega_plus, omega_minus, scheme):
    V_plus, V_minus = coupling_matrices(scheme)
    return (np.einsum('s...,sij->...ij', omega_plus, V_plus)
            + np.einsum('s...,sij->...ij', omega_minus, V_minus))


def unitary_rhs(rho, omega_plus, omega_minus, scheme):
    '''
        Coherent part of the Bloch equations driven by the deterministic
        fields only.

        :param rho: ``array`` shape ``(..., n, n)``

        :param omega_plus: ``array`` shape ``(2, ...)``, ``Ω⁺_det`` per polarization

        :param omega_minus: ``array`` shape ``(2, ...)``, ``Ω⁻_det`` per polarization

        :returns: ``dρ/dτ``, same shape as ``rho``

    '''
    drho = -1j * scheme.detunings * rho
    if omega_plus is not None:
        H = _coupling(omega_plus, omega_minus, scheme)
        drho = drho + 1j * (H @ rho - rho @ H)
    return drho


def deterministic_rhs(rho, rho_ground, rho_aux, omega_plus, omega_minus, rates, scheme):
    '''
        Unitary plus incoherent right-hand side for ``(ρ, ρ_ground, ρ_aux)``

        :param rates: ``IncoherentRates`` frozen over the step

    '''
    drho, drho_ground, drho_aux = rates.derivative(rho, rho_ground, rho_aux)
    return drho + unitary_rhs(rho, omega_plus, omega_minus, scheme), drho_ground, drho_aux


def rk4_step(rho, rho_ground, rho_aux, omega_plus, omega_minus, rates, dtau, scheme):
    '''
        Classic fourth-order Runge-Kutta step with fields and rates frozen.

        :returns: ``(rho, rho_ground, rho_aux)`` at ``τ + Δτ``

    '''
    def f(y):
        return deterministic_rhs(*y, omega_plus, omega_minus, rates, scheme)

    y0 = (rho, rho_ground, rho_aux)
    k1 = f(y0)
    k2 = f(tuple(y + 0.5 * dtau * k for y, k in zip(y0, k1)))
    k3 = f(tuple(y + 0.5 * dtau * k for y, k in zip(y0, k2)))
    k4 = f(tuple(y + dtau * k for y, k in zip(y0, k3)))
    return tuple(y + dtau / 6 * (a + 2 * b + 2 * c + d) for y, a, b, c, d in zip(y0, k1, k2, k3, k4))


def noise_increment(rho, omega_noise_plus, omega_noise_minus, xi_plus, xi_minus, g, gamma, dtau, scheme):
    '''
        Euler-Maruyama increment of the noise part, evaluated on the
        pre-update state.

        :param rho: ``array`` shape ``(..., n, n)``

        :param omega_noise_plus: ``array`` shape ``(2, ...)`` or ``None`` (atoms decoupled from the noise field)

        :param omega_noise_minus: ``array`` shape ``(2, ...)`` or ``None``

        :param xi_plus: ``array`` shape ``(2, ...)``

        :param xi_minus: ``array`` shape ``(2, ...)``

        :param g: diffusion gauge, shape ``(2, ...)``

        :param gamma: ``float``, paraxial radiative rate

        :returns: ``Δρ`` (already multiplied by ``Δτ``)

    '''
    if QUADRATIC_NOISE:
        raise NotImplementedError('noise terms quadratic in the coherences are not implemented')
    _, atom_scale = gauge_scales(g, gamma, dtau)
    V_plus, V_minus = coupling_matrices(scheme)

    N_plus = np.einsum('s...,sij->...ij', atom_scale * np.conj(xi_plus), V_minus)
    N_minus = np.einsum('s...,sij->...ij', atom_scale * np.conj(xi_minus), V_plus)
    rate = N_plus @ rho + rho @ N_minus
    if omega_noise_plus is not None:
        H = _coupling(omega_noise_plus, omega_noise_minus, scheme)
        rate = rate + 1j * (H @ rho - rho @ H)
    return rate * dtau


def divergence_mask(rho, rho_max):
    '''
        ``True`` for voxels with a non-finite entry or ``|ρ_pq| > rho_max``

        :param rho: ``array`` shape ``(..., n, n)``

        :returns: ``array`` shape ``(...)``

    '''
    bad = ~np.isfinite(rho) | (np.abs(rho) > rho_max)
    return bad.reshape(bad.shape[:-2] + (-1,)).any(axis=-1)


def bloch_vector(rho, u, l):
    '''
        Bloch vector ``(ρ_ul + ρ_lu, i(ρ_ul - ρ_lu), ρ_uu - ρ_ll)`` of the
        level pair ``(u, l)``

        :returns: ``array`` shape ``(3, ...)``

    '''
    rho_ul = rho[..., u, l]
    rho_lu = rho[..., l, u]
    return np.stack([rho_ul + rho_lu, 1j * (rho_ul - rho_lu), rho[..., u, u] - rho[..., l, l]])
