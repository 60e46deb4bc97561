'''
    Stages of one τ step. Run in order they advance a ``SystemState`` from
    ``τ`` to ``τ + Δτ``::

        run:
            stages: [pump, field, bloch, noise, probe]

    Trajectory-independent inputs come from ``resources['SimulationResource']``.

'''
import logging

import numpy as np

from sfxflow.core import SFXStage, resources
from sfxflow.physics import (effective_inversion, diffusion_gauge, drift_gauge_mask, gauge_scales, sf_slice_step,
                             propagate_pump, pump_flux, IncoherentRates, rk4_step, noise_increment,
                             divergence_mask)
from sfxflow.observables import photon_flux


class PumpPropagationStage(SFXStage):
    '''
        Marches the pump pulse through the medium with the absorption of the
        pre-step populations (bleaching) and sets ``state.pump_planes`` and
        ``state.J_pump``.

    '''
    class_version = '0.0.0'

    def __init__(self, **params):
        super(PumpPropagationStage, self).__init__(**params)

    def run(self, trajectory, step, state):
        super(PumpPropagationStage, self).run(trajectory, step, state)
        res = resources['SimulationResource']
        mu = state.absorption(step, res.n, res.table)
        state.pump_planes = propagate_pump(res.pump.boundary(step), mu[0], res.pump_propagator)
        # slice z sees the pump at its entrance plane
        state.J_pump = pump_flux(state.pump_planes[:-1], res.pump.photon_energy)


class FieldPropagationStage(SFXStage):
    '''
        Propagates the emitted field through every slice with the coherence
        and noise sources of the pre-step atomic state. Sets ``state.field``,
        ``state.gauge`` and ``state.J_omega``.

        Parameters:

         - ``drift_gauge``: ``bool``, override ``physics.drift_gauge``

    '''
    class_version = '0.0.0'

    def __init__(self, **params):
        super(FieldPropagationStage, self).__init__(**params)
        self.drift_gauge = params.get('drift_gauge', self.config['physics']['drift_gauge'])
        self.eps_g = self.config['run']['eps_g']
        self.field_absorption = self.config['physics']['field_absorption']

    def run(self, trajectory, step, state):
        super(FieldPropagationStage, self).run(trajectory, step, state)
        res = resources['SimulationResource']
        if not res.emits:
            return
        grid = res.grid
        field = state.field

        if res.seed is not None:
            seed_plus, seed_minus = res.seed.boundary(step)
        else:
            seed_plus = seed_minus = np.zeros((2,) + grid.plane_shape[1:], dtype=complex)
        zero = np.zeros_like(seed_plus)
        field.set_plane(0, (seed_plus, seed_minus, zero, zero))

        up, low = effective_inversion(state.rho, res.scheme, populations_only=True)
        state.gauge = diffusion_gauge(up, low, self.eps_g)
        field_scale, _ = gauge_scales(state.gauge, res.gamma, grid.dtau)
        drift = drift_gauge_mask(up, low) if self.drift_gauge and res.atoms_see_field else None

        if self.field_absorption:
            mu = state.absorption(step, res.n, res.table)[1:]
        else:
            mu = None
        noise = state.noise(step) if res.stochastic else None

        for iz in range(grid.nz):
            if mu is not None or res.delta is not None:
                G = res.propagator.absorption(mu[:, iz] if mu is not None else None, res.delta)
            else:
                G = None
            out = sf_slice_step(field.plane(iz), state.rho[iz], res.n[iz],
                                noise.xi_plus[:, iz] if noise is not None else None,
                                noise.xi_minus[:, iz] if noise is not None else None,
                                field_scale[:, iz], drift[:, iz] if drift is not None else None,
                                res.propagator, G, res.gamma, res.scheme)
            field.set_plane(iz + 1, out)

        if res.atoms_see_field:
            # slice z is driven by the field at its entrance plane
            flux = photon_flux(field.plus[:, :-1], field.minus[:, :-1], res.scheme.gamma_rad, grid.wavelength)
            state.J_omega = np.maximum(np.real(flux), 0)


class BlochUpdateStage(SFXStage):
    '''
        Deterministic RK4 update of ``(ρ, ρ_ground, ρ_aux)`` with the pump and
        emitted-field fluxes and the deterministic fields of this step held
        fixed. Keeps the pre-step matrix in ``state.rho_pre``.

    '''
    class_version = '0.0.0'

    def __init__(self, **params):
        super(BlochUpdateStage, self).__init__(**params)

    def run(self, trajectory, step, state):
        super(BlochUpdateStage, self).run(trajectory, step, state)
        res = resources['SimulationResource']
        rates = IncoherentRates(state.J_pump, state.J_omega, res.table, res.scheme)
        if res.atoms_see_field:
            omega_plus = state.field.det_plus[:, :-1]
            omega_minus = state.field.det_minus[:, :-1]
        else:
            omega_plus = omega_minus = None
        state.rho_pre = state.rho
        state.rho, state.rho_ground, state.rho_aux = rk4_step(state.rho, state.rho_ground, state.rho_aux,
                                                              omega_plus, omega_minus, rates,
                                                              res.grid.dtau, res.scheme)


class NoiseUpdateStage(SFXStage):
    '''
        Euler-Maruyama noise increment of ``ρ`` evaluated on the pre-step
        state, followed by the divergence check (``run.rho_max``).

    '''
    class_version = '0.0.0'

    def __init__(self, **params):
        super(NoiseUpdateStage, self).__init__(**params)
        self.rho_max = params.get('rho_max', self.config['run']['rho_max'])

    def run(self, trajectory, step, state):
        super(NoiseUpdateStage, self).run(trajectory, step, state)
        res = resources['SimulationResource']
        if res.stochastic:
            noise = state.noise(step)
            rho = state.rho_pre if state.rho_pre is not None else state.rho
            if res.atoms_see_field:
                omega_plus = state.field.noise_plus[:, :-1]
                omega_minus = state.field.noise_minus[:, :-1]
            else:
                omega_plus = omega_minus = None
            gauge = state.gauge if state.gauge is not None else np.ones(noise.xi_plus.shape, dtype=complex)
            state.rho = state.rho + noise_increment(rho, omega_plus, omega_minus, noise.xi_plus, noise.xi_minus,
                                                    gauge, res.gamma, res.grid.dtau, res.scheme)

        bad = divergence_mask(state.rho, self.rho_max)
        if bad.any():
            state.mark_divergent(step, bad)
        elif not np.all(np.isfinite(state.field.plus)):
            logging.debug(f'non-finite field in trajectory {trajectory} at step {step}')
            state.mark_divergent(step, np.ones(res.grid.voxel_shape, dtype=bool))
