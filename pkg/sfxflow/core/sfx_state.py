import logging

import numpy as np

from ..physics.atomic_model import absorption_coefficients
from ..physics.field_solver import OpticalField
from ..physics.noise_engine import NoiseStream, sample_noise


class SystemState(object):
    '''
        Mutable state of one trajectory, handed from stage to stage within a
        τ step.

        Atomic variables (shape ``(nz, nx, ny)`` plus level axes):

         - ``rho``: density matrix, ``(nz, nx, ny, n, n)``, zero at τ = 0
         - ``rho_ground``: ground-state population, one at τ = 0
         - ``rho_aux``: auxiliary-state population

        Fields and rates of the current step:

         - ``field``: ``OpticalField`` on all ``nz + 1`` planes
         - ``pump_planes``: pump envelope ``(nz + 1, nx, ny)`` in V/m
         - ``mu``: absorption coefficients ``(3, nz, nx, ny)`` from the pre-step populations
         - ``J_pump``: pump flux seen by each slice ``(nz, nx, ny)``
         - ``J_omega``: emitted flux seen by each slice ``(2, nz, nx, ny)``
         - ``gauge``: diffusion gauge ``(2, nz, nx, ny)`` of the pre-step state
         - ``rho_pre``: the density matrix before the deterministic update

        Bookkeeping: ``divergent``, ``divergence`` (``(z, τ)`` of the first
        divergent voxel) and ``samples`` (observable name to sample).

    '''

    def __init__(self, grid, n_levels, trajectory, seed):
        self.grid = grid
        self.trajectory = int(trajectory)
        self.seed = int(seed)
        self.stream = NoiseStream(seed, trajectory)

        self.rho = np.zeros(grid.voxel_shape + (n_levels, n_levels), dtype=complex)
        self.rho_ground = np.ones(grid.voxel_shape, dtype=complex)
        self.rho_aux = np.zeros(grid.voxel_shape, dtype=complex)
        self.rho_pre = None

        self.field = OpticalField.zeros(grid)
        self.pump_planes = None
        self.mu = None
        self.J_pump = np.zeros(grid.voxel_shape)
        self.J_omega = np.zeros((2,) + grid.voxel_shape)
        self.gauge = None

        self._noise = None
        self._mu_step = None
        self.divergent = False
        self.divergence = (-1, -1)
        self.samples = dict()
        self.exit_photons = None

    def __repr__(self):
        return f'SystemState(trajectory={self.trajectory}, divergent={self.divergent})'

    def noise(self, step):
        '''
            ``NoiseField`` of τ step ``step``; drawn once and shared by the
            field sources and the atomic increment

        '''
        if self._noise is None or self._noise.step != step:
            self._noise = sample_noise(self.stream, (2,) + self.grid.voxel_shape, step)
        return self._noise

    def mark_divergent(self, step, mask):
        '''
            Flag the trajectory as divergent

            :param mask: ``array`` of ``bool`` shape ``(nz, nx, ny)``

        '''
        if self.divergent:
            return
        self.divergent = True
        bad_z = np.flatnonzero(mask.reshape(mask.shape[0], -1).any(axis=-1))
        self.divergence = (int(bad_z[0]) if bad_z.size else -1, int(step))
        logging.warning(f'trajectory {self.trajectory} diverged at slice {self.divergence[0]}, step {step}')

    def absorption(self, step, n, table):
        '''
            Absorption coefficients ``(3, nz, nx, ny)`` of the populations at
            the start of step ``step``, computed once per step. Negative
            values from noisy populations are clipped to zero.

        '''
        if self._mu_step != step or self.mu is None:
            populations = np.einsum("...ii->...i", self.rho)
            self.mu = np.maximum(absorption_coefficients(self.rho_ground, self.rho_aux, populations, n, table), 0)
            self._mu_step = step
        return self.mu
