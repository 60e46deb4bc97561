import os
import logging

from sfxflow.core import SFXGenerator
from sfxflow.data import trajectory_dtype


class TrajectoryLoopGenerator(SFXGenerator):
    '''
        Default trajectory generator

        Splits the trajectory ids ``first_trajectory .. first_trajectory + n_trajectories``
        into blocks of ``block_size`` consecutive ids. Block ``i`` is handled
        by rank ``i % n_workers``, where ``n_workers`` is the MPI size capped
        by the ``SFX_THREADS`` environment variable (ranks beyond the cap
        receive no trajectories)::

            run:
                trajectories: 1000
                block_size: 8

        Each block is accumulated separately and blocks are merged in index
        order, so results do not depend on the number of workers.

    '''
    class_version = '0.0.0'

    default_block_size = 8

    def __init__(self, **params):
        super(TrajectoryLoopGenerator, self).__init__(**params)

        self.block_size = params.get('block_size', self.default_block_size)
        if self.block_size < 1:
            raise ValueError(f'block_size must be positive, got {self.block_size}')
        self.n_workers = self.worker_count(self.size)

        self.iteration = 0
        self.slices = list()

    @staticmethod
    def worker_count(size):
        '''
            Number of ranks that receive trajectories, ``SFX_THREADS`` caps the MPI size

        '''
        cap = os.environ.get('SFX_THREADS', None)
        if cap is None:
            return size
        try:
            cap = int(cap)
        except ValueError:
            logging.warning(f'ignoring SFX_THREADS={cap}, not an integer')
            return size
        return max(1, min(size, cap))

    def init(self):
        super(TrajectoryLoopGenerator, self).init()
        self.data_manager.create_dset(self.dset_name, trajectory_dtype)
        self.data_manager.set_attrs(self.dset_name,
                                    classname=self.classname,
                                    class_version=self.class_version,
                                    block_size=self.block_size,
                                    first_trajectory=self.first_trajectory,
                                    n_trajectories=self.n_trajectories,
                                    )
        self.setup_slices()

    def setup_slices(self):
        '''
            Initialize blocks for loop

        '''
        start = self.first_trajectory
        end = self.first_trajectory + self.n_trajectories
        self.slices = list()
        if self.rank >= self.n_workers:
            return
        r = range(start + self.rank * self.block_size, end, self.n_workers * self.block_size)
        self.slices = [slice(i, min(i + self.block_size, end)) for i in r]

    def next(self):
        if self.iteration >= len(self.slices):
            curr_slice = SFXGenerator.EMPTY
        else:
            curr_slice = self.slices[self.iteration]
        self.iteration += 1
        return curr_slice

    def __len__(self):
        return len(self.slices)

    def block_index(self, block):
        return (block.start - self.first_trajectory) // self.block_size
