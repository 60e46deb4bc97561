'''
    Level scheme, dipole couplings and incoherent kinetics of the Cu K-alpha-1
    system.

    Level order used by every density-matrix array in the package::

        0  1s1/2 m=-1/2     (upper)
        1  1s1/2 m=+1/2     (upper)
        2  2p3/2 m=-3/2     (lower)
        3  2p3/2 m=-1/2     (lower)
        4  2p3/2 m=+1/2     (lower)
        5  2p3/2 m=+3/2     (lower)

    Field components ``F`` are ordered ``(pump, Omega_-1, Omega_+1)`` and
    polarizations ``s`` are ordered ``(-1, +1)``. Cross-sections are in nm^2,
    fluxes in photons nm^-2 fs^-1, so every rate is in fs^-1.

'''
import logging
import os

import numpy as np
import yaml

from ..config import ConfigError, parse_quantity

UPPER_LABELS = ('1s1/2(m=-1/2)', '1s1/2(m=+1/2)')
LOWER_LABELS = ('2p3/2(m=-3/2)', '2p3/2(m=-1/2)', '2p3/2(m=+1/2)', '2p3/2(m=+3/2)')
POLARIZATIONS = (-1, +1)
FIELD_COMPONENTS = ('pump', 'Omega_-1', 'Omega_+1')

#: photoionization cross-sections (nm^2) of the Cu(NO3)2 medium
TABLE_I = dict(
    sigma_g_P_1s=2.53e-6,
    sigma_g_P_2p=1.04e-7,
    sigma_g_P_a=3.23e-7,
    sigma_g_Omega_2p=1.52e-7,
    sigma_g_Omega_a=4.34e-7,
    sigma_i_P_1s=4.75e-7,
    sigma_i_P_2p=3.02e-7,
    sigma_i_Omega_1s=6.53e-7,
    sigma_i_Omega_2p=4.15e-7,
    sigma_a_P=3.27e-7,
    sigma_a_Omega=4.58e-7,
    sigma_P_O=2.00e-8,
    sigma_P_N=1.11e-8,
    sigma_Omega_O=2.75e-8,
    sigma_Omega_N=1.55e-8,
)

#: atoms of each compound element per copper atom (8 M copper nitrate)
COMPOUND_COUNTS = dict(O=13, N=2)

#: natural widths (fs^-1)
GAMMA_K = 2.24
GAMMA_L3 = 0.92


def _readonly(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


class LevelScheme(object):
    '''
        Immutable description of a manifold of upper and lower levels coupled
        by two circular polarizations.

        :param upper_labels: ``tuple`` of ``str``, upper level names

        :param lower_labels: ``tuple`` of ``str``, lower level names

        :param T: ``array`` shape ``(2, n_upper, n_lower)``, coupling ``T_{ul,s}`` for ``s = (-1, +1)``

        :param G_rad: ``array`` shape ``(n_lower, n_upper)``, radiative branching ``G_{lu}``

        :param gamma_rad: ``float``, spontaneous rate in fs^-1

        :param natural_widths: ``array`` shape ``(n_levels,)`` in fs^-1

        :param energies: ``array`` shape ``(n_levels,)`` of level detunings from the carrier in fs^-1 (default all zero)

    '''

    def __init__(self, upper_labels, lower_labels, T, G_rad, gamma_rad, natural_widths, energies=None):
        self.upper_labels = tuple(upper_labels)
        self.lower_labels = tuple(lower_labels)
        self.n_upper = len(self.upper_labels)
        self.n_lower = len(self.lower_labels)
        self.n_levels = self.n_upper + self.n_lower

        T = np.asarray(T, dtype=complex)
        if T.shape != (2, self.n_upper, self.n_lower):
            raise ValueError(f'coupling matrix has shape {T.shape}, expected {(2, self.n_upper, self.n_lower)}')
        G_rad = np.asarray(G_rad, dtype=float)
        if G_rad.shape != (self.n_lower, self.n_upper):
            raise ValueError(f'branching matrix has shape {G_rad.shape}, expected {(self.n_lower, self.n_upper)}')
        natural_widths = np.asarray(natural_widths, dtype=float)
        if natural_widths.shape != (self.n_levels,):
            raise ValueError(f'expected {self.n_levels} natural widths, got {natural_widths.shape}')
        if np.any(natural_widths <= 0):
            raise ConfigError(f'natural widths must be positive, got {natural_widths}', key='physics.widths')
        if gamma_rad < 0:
            raise ConfigError(f'radiative rate must be non-negative, got {gamma_rad}', key='physics.gamma_rad')

        self.T_ul = _readonly(T)
        self.T_lu = _readonly(np.conj(np.swapaxes(T, 1, 2)))
        self.gamma_rad = float(gamma_rad)
        self.natural_widths = _readonly(natural_widths)
        self.energies = _readonly(np.zeros(self.n_levels) if energies is None else np.asarray(energies, dtype=float))

        G = np.zeros((self.n_levels, self.n_levels))
        G[self.lower, self.upper] = G_rad
        self.G_rad = _readonly(G_rad)
        self.G = _readonly(G)

    def __repr__(self):
        return (f'LevelScheme(n_upper={self.n_upper}, n_lower={self.n_lower}, gamma_rad={self.gamma_rad}, '
                f'natural_widths={self.natural_widths.tolist()})')

    @property
    def upper(self):
        return slice(0, self.n_upper)

    @property
    def lower(self):
        return slice(self.n_upper, self.n_levels)

    @property
    def detunings(self):
        ''' ``Δω_pq = ω_p - ω_q`` as an ``(n_levels, n_levels)`` array '''
        return self.energies[:, None] - self.energies[None, :]

    @property
    def gamma_dec(self):
        ''' Coherence decay rate ``(Γ_u + Γ_l)/2`` of the first upper/lower pair '''
        return 0.5 * (self.natural_widths[0] + self.natural_widths[self.n_upper])


class CrossSectionTable(object):
    '''
        Partial photoionization cross-sections (nm^2).

         - ``S_ground``: shape ``(3, n_levels + 1)``, last column is the auxiliary state
         - ``S_ion``: shape ``(3, n_levels)``
         - ``S_aux``: shape ``(3,)``
         - ``sigma_compound``: shape ``(3,)``

        Rows follow ``FIELD_COMPONENTS``.

    '''

    def __init__(self, S_ground, S_ion, S_aux, sigma_compound, values=None):
        S_ground = np.asarray(S_ground, dtype=float)
        S_ion = np.asarray(S_ion, dtype=float)
        S_aux = np.asarray(S_aux, dtype=float)
        sigma_compound = np.asarray(sigma_compound, dtype=float)
        for name, arr in (('S_ground', S_ground), ('S_ion', S_ion), ('S_aux', S_aux), ('sigma_compound', sigma_compound)):
            if np.any(arr < 0):
                raise ConfigError(f'{name} has negative entries', key=f'physics.cross_sections')
        self.S_ground = _readonly(S_ground)
        self.S_ion = _readonly(S_ion)
        self.S_aux = _readonly(S_aux)
        self.sigma_compound = _readonly(sigma_compound)
        self.values = dict(values) if values is not None else dict()

    def __repr__(self):
        return f'CrossSectionTable({", ".join(f"{k}={v:g}" for k, v in self.values.items())})'

    @property
    def n_levels(self):
        return self.S_ion.shape[1]

    def total_ground(self):
        ''' Total ground-state cross-section per field component, including the auxiliary channel '''
        return self.S_ground.sum(axis=-1)


def load_cross_section_overrides(path):
    '''
        Read cross-section overrides from either a YAML mapping or a text
        file of ``key = value`` lines (``#`` starts a comment)

        :param path: ``str``, path to file

        :returns: ``dict`` of override name to value in nm^2

    '''
    if not os.path.exists(path):
        raise ConfigError(f'cross-section file {path} not found', key='physics.cross_section_file')
    with open(path, 'r') as f:
        text = f.read()
    if '=' in text:
        overrides = dict()
        for iline, line in enumerate(text.splitlines()):
            line = line.split('#')[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f'{path}:{iline + 1}: expected "key = value", got "{line}"', key='physics.cross_section_file')
            key, val = (s.strip() for s in line.split('=', 1))
            overrides[key] = val
    else:
        overrides = yaml.load(text, Loader=yaml.FullLoader) or dict()
    return overrides


def _cu_tables(v):
    n_O, n_N = COMPOUND_COUNTS['O'], COMPOUND_COUNTS['N']
    ground_2p = np.array([
        [0.27, 0.23, 0.23, 0.27],
        [0.12, 0.18, 0.28, 0.42],
        [0.42, 0.28, 0.18, 0.12],
    ])
    ion_2p = np.array([
        [1.05, 0.95, 0.95, 1.05],
        [0.70, 0.83, 1.06, 1.41],
        [1.41, 1.06, 0.83, 0.70],
    ])
    sg_2p = np.array([v['sigma_g_P_2p'], v['sigma_g_Omega_2p'], v['sigma_g_Omega_2p']])
    si_2p = np.array([v['sigma_i_P_2p'], v['sigma_i_Omega_2p'], v['sigma_i_Omega_2p']])

    S_ground = np.zeros((3, 7))
    S_ground[:, 0:2] = [[0.5 * v['sigma_g_P_1s']] * 2, [0., 0.], [0., 0.]]
    S_ground[:, 2:6] = ground_2p * sg_2p[:, None]
    S_ground[:, 6] = [v['sigma_g_P_a'], v['sigma_g_Omega_a'], v['sigma_g_Omega_a']]

    S_ion = np.zeros((3, 6))
    S_ion[:, 0:2] = [
        [v['sigma_i_P_1s'], v['sigma_i_P_1s']],
        [0.75 * v['sigma_i_Omega_1s'], 1.25 * v['sigma_i_Omega_1s']],
        [1.25 * v['sigma_i_Omega_1s'], 0.75 * v['sigma_i_Omega_1s']],
    ]
    S_ion[:, 2:6] = ion_2p * si_2p[:, None]

    S_aux = np.array([v['sigma_a_P'], v['sigma_a_Omega'], v['sigma_a_Omega']])
    sigma_compound = np.array([
        n_O * v['sigma_P_O'] + n_N * v['sigma_P_N'],
        n_O * v['sigma_Omega_O'] + n_N * v['sigma_Omega_N'],
        n_O * v['sigma_Omega_O'] + n_N * v['sigma_Omega_N'],
    ])
    return S_ground, S_ion, S_aux, sigma_compound


def build_cu_kalpha1(gamma_rad=0.88, gamma_upper=GAMMA_K, gamma_lower=GAMMA_L3, energies=None,
                     cross_sections=None, cross_section_file=None):
    '''
        Build the Cu K-alpha-1 level scheme and photoionization table.

        :param gamma_rad: ``float``, spontaneous rate ``Γ_rad`` in fs^-1 (an approximate K-alpha-1 value by default)

        :param gamma_upper: ``float``, natural width of the 1s holes (default 2.24 fs^-1)

        :param gamma_lower: ``float``, natural width of the 2p3/2 holes (default 0.92 fs^-1, use 0.96 for the alternative value)

        :param energies: optional ``array`` of 6 level detunings in fs^-1

        :param cross_sections: optional ``dict`` of table overrides keyed like ``TABLE_I``

        :param cross_section_file: optional path read with ``load_cross_section_overrides``

        :returns: ``(LevelScheme, CrossSectionTable)``

    '''
    for key, val in (('physics.gamma_upper', gamma_upper), ('physics.gamma_lower', gamma_lower)):
        if val is None or float(val) <= 0:
            raise ConfigError(f'{key} must be a positive width, got {val}', key=key)

    values = dict(TABLE_I)
    overrides = dict()
    if cross_section_file is not None:
        overrides.update(load_cross_section_overrides(cross_section_file))
    if cross_sections is not None:
        overrides.update(cross_sections)
    for key, val in overrides.items():
        if key not in values:
            raise ConfigError(f'unknown cross-section {key}', key=f'physics.cross_sections.{key}')
        val = parse_quantity(val, 'area', key=f'physics.cross_sections.{key}')
        if val < 0:
            raise ConfigError(f'cross-section {key} must be non-negative, got {val}', key=f'physics.cross_sections.{key}')
        values[key] = val
    if overrides:
        logging.info(f'cross-section overrides: {overrides}')

    T = np.zeros((2, 2, 4), dtype=complex)
    # s = -1: 1s(-1/2) -> 2p(-3/2), 1s(+1/2) -> 2p(-1/2)
    T[0, 0, 0] = 1 / np.sqrt(3)
    T[0, 1, 1] = 1 / 3
    # s = +1: 1s(-1/2) -> 2p(+1/2), 1s(+1/2) -> 2p(+3/2)
    T[1, 0, 2] = 1 / 3
    T[1, 1, 3] = 1 / np.sqrt(3)

    G_rad = np.array([
        [1 / 3, 0],
        [2 / 9, 1 / 9],
        [1 / 9, 2 / 9],
        [0, 1 / 3],
    ])
    widths = np.array([gamma_upper] * 2 + [gamma_lower] * 4, dtype=float)
    scheme = LevelScheme(UPPER_LABELS, LOWER_LABELS, T, G_rad, gamma_rad, widths, energies=energies)
    table = CrossSectionTable(*_cu_tables(values), values=values)
    return scheme, table


def _flux_vector(J_pump, J_omega):
    '''
        Stack fluxes into shape ``(3, ...)`` following ``FIELD_COMPONENTS``

        :param J_pump: pump flux, scalar or array

        :param J_omega: flux per polarization, shape ``(2, ...)``

    '''
    J_pump = np.asarray(J_pump, dtype=float)
    J_omega = np.asarray(J_omega, dtype=float)
    shape = np.broadcast_shapes(J_pump.shape, J_omega.shape[1:])
    return np.stack([np.broadcast_to(J_pump, shape),
                     np.broadcast_to(J_omega[0], shape),
                     np.broadcast_to(J_omega[1], shape)])


def pump_rates(J_pump, J_omega, table):
    '''
        Ground-state photoionization rates ``p_i = Σ_F J_F S^(ground)_{F,i}``

        :param J_pump: pump flux, scalar or array over voxels

        :param J_omega: emitted-field flux per polarization, shape ``(2, ...)``

        :param table: ``CrossSectionTable``

        :returns: ``array`` shape ``(..., n_levels)`` in fs^-1 (auxiliary channel excluded)

    '''
    J = _flux_vector(J_pump, J_omega)
    return np.einsum('f...,fi->...i', J, table.S_ground[:, :-1])


def lifetimes(J_pump, J_omega, table, scheme):
    '''
        Inverse lifetimes ``Γ_i = Γ_i^(nat) + Σ_F S^(ion)_{F,i} J_F``

        :returns: ``array`` shape ``(..., n_levels)`` in fs^-1

    '''
    J = _flux_vector(J_pump, J_omega)
    return scheme.natural_widths + np.einsum('f...,fi->...i', J, table.S_ion)


def absorption_coefficients(rho_ground, rho_aux, populations, n, table):
    '''
        Absorption coefficient per field component. Imaginary parts of the
        populations are discarded.

        :param rho_ground: ground-state population, array over voxels

        :param rho_aux: auxiliary-state population, array over voxels

        :param populations: ``array`` shape ``(..., n_levels)``, diagonal of ``ρ``

        :param n: copper number density in nm^-3, scalar or array over voxels

        :param table: ``CrossSectionTable``

        :returns: ``array`` shape ``(3, ...)`` in nm^-1

    '''
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError('number density must be non-negative')
    rho_ground = np.real(rho_ground)
    rho_aux = np.real(rho_aux)
    populations = np.real(populations)
    mu = (table.total_ground()[:, None] * rho_ground.reshape(1, -1)
          + table.S_aux[:, None] * rho_aux.reshape(1, -1)
          + (table.S_ion @ populations.reshape(-1, table.n_levels).T)
          + table.sigma_compound[:, None])
    mu = mu.reshape((3,) + np.shape(rho_ground))
    return n * mu


def incoherent_derivative(rho, rho_ground, rho_aux, p, gamma, J_pump, J_omega, scheme, table):
    '''
        Incoherent part of the master equation: decay, pumping from the
        ground state, radiative feeding of the lower levels, ground-state
        depletion and auxiliary-state kinetics.

        :param rho: ``array`` shape ``(..., n, n)``

        :param rho_ground: ``array`` shape ``(...)``

        :param rho_aux: ``array`` shape ``(...)``

        :param p: pump rates from ``pump_rates``, shape ``(..., n)``

        :param gamma: inverse lifetimes from ``lifetimes``, shape ``(..., n)``

        :param J_pump: pump flux, shape ``(...)``

        :param J_omega: emitted-field flux, shape ``(2, ...)``

        :returns: ``(drho, drho_ground, drho_aux)``

    '''
    J = _flux_vector(J_pump, J_omega)
    drho = -0.5 * (gamma[..., :, None] + gamma[..., None, :]) * rho
    populations = np.einsum('...ii->...i', rho)
    feed = p * rho_ground[..., None] + scheme.gamma_rad * np.einsum('pk,...k->...p', scheme.G, populations)
    idx = np.arange(scheme.n_levels)
    drho[..., idx, idx] += feed

    ground_rate = np.einsum('f...,f->...', J, table.total_ground())
    aux_gain = np.einsum('f...,f->...', J, table.S_ground[:, -1])
    aux_loss = np.einsum('f...,f->...', J, table.S_aux)
    drho_ground = -ground_rate * rho_ground
    drho_aux = aux_gain * rho_ground - aux_loss * rho_aux
    return drho, drho_ground, drho_aux


def total_ground_cross_section(table, component):
    '''
        Total ground-state photoionization cross-section (nm^2) seen by one
        field component, auxiliary channel included. The constant-flux
        solution of the ground-state equation is ``exp(-σ_tot J τ)``.

        :param component: ``int`` row index or ``str`` from ``FIELD_COMPONENTS``

    '''
    if isinstance(component, str):
        component = FIELD_COMPONENTS.index(component)
    return float(table.total_ground()[component])


class IncoherentRates(object):
    '''
        Flux-dependent rates frozen over one τ step.

         - ``p``: ground-state pump rates, shape ``(..., n_levels)``
         - ``gamma``: inverse lifetimes, shape ``(..., n_levels)``
         - ``J_pump``: pump flux, shape ``(...)``
         - ``J_omega``: emitted-field flux, shape ``(2, ...)``

    '''

    def __init__(self, J_pump, J_omega, table, scheme):
        self.J_pump = np.asarray(J_pump, dtype=float)
        self.J_omega = np.asarray(J_omega, dtype=float)
        if np.any(self.J_pump < 0) or np.any(self.J_omega < 0):
            raise ValueError('fluxes must be non-negative')
        self.p = pump_rates(self.J_pump, self.J_omega, table)
        self.gamma = lifetimes(self.J_pump, self.J_omega, table, scheme)
        self.table = table
        self.scheme = scheme

    def derivative(self, rho, rho_ground, rho_aux):
        return incoherent_derivative(rho, rho_ground, rho_aux, self.p, self.gamma,
                                     self.J_pump, self.J_omega, self.scheme, self.table)


def effective_inversion(rho, scheme, populations_only=False):
    '''
        Effective upper and lower populations per polarization::

            ρ_up,s  = Σ T_{lu,s} ρ_{uu'} T_{u'l,s}
            ρ_low,s = Σ T_{ul,s} ρ_{ll'} T_{l'u,s}

        :param rho: ``array`` shape ``(..., n, n)``

        :param populations_only: ``bool``, drop intra-manifold coherences (used for noise gauging)

        :returns: ``(rho_up, rho_low)``, each shape ``(2, ...)``

    '''
    up, low = scheme.upper, scheme.lower
    if populations_only:
        pop = np.einsum('...ii->...i', rho)
        rho_up = np.einsum('slu,...u,sul->s...', scheme.T_lu, pop[..., up], scheme.T_ul)
        rho_low = np.einsum('sul,...l,slu->s...', scheme.T_ul, pop[..., low], scheme.T_lu)
    else:
        rho_up = np.einsum('slu,...uv,svl->s...', scheme.T_lu, rho[..., up, up], scheme.T_ul)
        rho_low = np.einsum('sul,...lm,smu->s...', scheme.T_ul, rho[..., low, low], scheme.T_lu)
    return rho_up, rho_low


def polarization_fields(rho, scheme):
    '''
        Macroscopic polarization ``𝒫⁺_s = Σ T_{lu,s} ρ_ul`` and
        ``𝒫⁻_s = Σ ρ_lu T_{ul,s}``

        :returns: ``(P_plus, P_minus)``, each shape ``(2, ...)``

    '''
    up, low = scheme.upper, scheme.lower
    P_plus = np.einsum('slu,...ul->s...', scheme.T_lu, rho[..., up, low])
    P_minus = np.einsum('...lu,sul->s...', rho[..., low, up], scheme.T_ul)
    return P_plus, P_minus
