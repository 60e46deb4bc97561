from tqdm import tqdm
import logging
import subprocess
import sys
import os
import numpy as np

from .. import SFX_MPI
if SFX_MPI:
    from mpi4py import MPI

from ..data import (SFXDataManager, trajectory_dtype, trajectory_record, write_trajectories, write_accumulator, write_grid,
                    write_run_attrs, write_derived)
from ..modules import get_class
from ..observables import EnsembleAccumulator, ensemble_derived

from .sfx_resource import resources, SFXResource
from .sfx_stage import SFXStage
from .sfx_state import SystemState

def _read_version():
    # checkout first, then the installed distribution
    path = os.path.join(os.path.dirname(__file__), '..', '..', 'VERSION')
    if os.path.exists(path):
        with open(path, 'r') as fh:
            return fh.read().strip()
    try:
        from importlib.metadata import version
        return version('sfxflow')
    except Exception:
        return '0.0.0'


__version__ = _read_version()

#: ``run.stages`` short names
STAGE_CLASSES = dict(
    pump='PumpPropagationStage',
    field='FieldPropagationStage',
    bloch='BlochUpdateStage',
    noise='NoiseUpdateStage',
    probe='ObservableProbeStage',
)


def version_string():
    '''
        Package version, extended with ``git describe`` when run from a checkout

    '''
    try:
        described = subprocess.run(['git', 'describe', '--always', '--dirty'], capture_output=True, text=True,
                                   cwd=os.path.dirname(__file__), timeout=5)
        if described.returncode == 0 and described.stdout.strip():
            return f'{__version__}+{described.stdout.strip()}'
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class SFXManager(object):
    '''
        Overarching coordination class. Creates the data manager, resources,
        trajectory generator and stages of a run. After initializing, every
        trajectory of every block is integrated over all τ steps, running
        the stages in sequence at each step. Accepted trajectories are
        accumulated per block; blocks are merged in block order at the end.

        The standard execution sequence (as implemented in ``sfxflow.run``) is::

            manager = SFXManager(config, output_filename)

            manager.init()      # initialize components
            manager.run()       # execute trajectory loop
            manager.finish()    # merge, write and clean up

    '''

    def __init__(self, config, output_filename=None):
        self.comm = MPI.COMM_WORLD if SFX_MPI else None
        self.rank = self.comm.Get_rank() if SFX_MPI else 0
        self.size = self.comm.Get_size() if SFX_MPI else 1

        self.config = config
        self.output_filename = output_filename if output_filename is not None else config['output']['path']
        self.blocks = list()
        self.records = list()
        self.accumulator = None

        # set up the data manager
        self.configure_data_manager(self.output_filename)

        # set up resources
        self.configure_resources(config)

        # set up the trajectory generator
        self.configure_generator(config)

        # set up integration stages
        self.configure_flow(config)

        if SFX_MPI:
            self.comm.barrier()

    def configure_data_manager(self, output_filename):
        '''
            Create an ``SFXDataManager`` that truncates ``output_filename``.
            Access via ``manager.data_manager``.

        '''
        self.data_manager = SFXDataManager(output_filename, mode='w', mpi=SFX_MPI)

    def configure_resources(self, config):
        '''
            Create the ``SimulationResource`` shared by all stages

        '''
        global resources
        for key in list(resources.keys()):
            del resources[key]

        for obj_classname, obj_path in (('SimulationResource', 'sfxflow.modules'),):
            obj_class = get_class(obj_classname, path=obj_path)
            if not issubclass(obj_class, SFXResource):
                raise RuntimeError(f'failed to load resource {obj_classname} - does not inherit from SFXResource')
            resources[obj_classname] = obj_class(classname=obj_classname, data_manager=self.data_manager,
                                                 config=config)

    def configure_generator(self, config):
        '''
            Create the ``TrajectoryLoopGenerator``. Access via ``manager.generator``.

        '''
        run = config['run']
        classname = 'TrajectoryLoopGenerator'
        self.generator = get_class(classname, path='sfxflow.modules')(
            classname=classname,
            dset_name='trajectories',
            data_manager=self.data_manager,
            n_trajectories=run['trajectories'],
            first_trajectory=run['first_trajectory'],
            block_size=run['block_size'],
        )

    def configure_flow(self, config):
        '''
            Create the ``SFXStage`` instances in the order of ``run.stages``.
            Short names map onto the built-in stages; any other entry is a
            classname searched with ``get_class``. Access via ``manager.stages``.

        '''
        stage_params = config['run']['stage_params']
        self.stages = list()
        for name in config.stages:
            if name in STAGE_CLASSES:
                stage_class = get_class(STAGE_CLASSES[name], path='sfxflow.modules')
            else:
                stage_class = get_class(name)
            if not issubclass(stage_class, SFXStage):
                raise RuntimeError(f'failed to load stage {name} - does not inherit from SFXStage')
            self.stages.append(stage_class(name=name, classname=stage_class.__name__, data_manager=self.data_manager,
                                           config=config, **stage_params.get(name, dict())))

    def init(self):
        '''
            Execute ``init()`` method of resources, generator, and stages, in
            sequence and in that order.

        '''
        global resources
        for classname, resource in resources.items():
            resource.init(self.generator.dset_name)

        self.generator.init()

        for stage in self.stages:
            stage.init(self.generator.dset_name)

        if SFX_MPI:
            self.comm.barrier()

    def run(self):
        '''
            Trajectory loop. Every block handed out by the generator gets its
            own ``EnsembleAccumulator``; each trajectory is integrated until
            the last τ step or its first divergence.

        '''
        if self.rank == 0:
            print(f'Run loop on {self.generator.dset_name}:')
            print('  ' + ' -> '.join([stage.name for stage in self.stages]))

        res = resources['SimulationResource']
        seed = self.config['run']['seed']
        ntau = res.grid.ntau

        loop_gen = tqdm(self.generator, smoothing=1, ascii=True) if self.rank == 0 else self.generator
        for block in loop_gen:
            if block == self.generator.EMPTY:
                continue
            block_index = self.generator.block_index(block)
            acc = EnsembleAccumulator()
            for stage in self.stages:
                stage.register(acc)
            for trajectory in range(block.start, block.stop):
                state = SystemState(res.grid, res.scheme.n_levels, trajectory, seed)
                for step in range(ntau):
                    for stage in self.stages:
                        stage.run(trajectory, step, state)
                    if state.divergent:
                        break
                self.records.append(trajectory_record(trajectory, seed, block_index, divergent=state.divergent,
                                                      divergence_z=state.divergence[0],
                                                      divergence_tau=state.divergence[1],
                                                      photons_exit=state.exit_photons))
                if state.divergent:
                    acc.add_divergent()
                else:
                    acc.add_trajectory(state.samples)
            self.blocks.append((block_index, acc))
            logging.info(f"block {block_index}: {acc!r}")
            sys.stdout.flush()
        if SFX_MPI:
            self.comm.barrier()

    def merge_blocks(self):
        '''
            Merge all block accumulators in block order on rank 0 and share
            the result with every rank

            :returns: ``EnsembleAccumulator``

        '''
        blocks = self.blocks
        if SFX_MPI:
            gathered = self.comm.gather(blocks, root=0)
            blocks = [b for rank_blocks in gathered for b in rank_blocks] if self.rank == 0 else None
        if self.rank == 0:
            blocks = sorted(blocks, key=lambda b: b[0])
            accumulator = EnsembleAccumulator.merged([acc for _, acc in blocks])
            if not accumulator.names:
                # every trajectory diverged, or none ran; keep the declared shapes
                for stage in self.stages:
                    stage.register(accumulator)
        else:
            accumulator = None
        if SFX_MPI:
            accumulator = self.comm.bcast(accumulator, root=0)
        return accumulator

    def finish(self):
        '''
            Execute ``finish()`` of generator, stages and resources, after
            merging and writing the ensemble. Raises ``RuntimeError`` if the
            fraction of divergent trajectories exceeds ``run.divergence_threshold``.

        '''
        self.generator.finish()
        if SFX_MPI:
            self.comm.barrier()

        self.accumulator = self.merge_blocks()
        records = self.records
        if SFX_MPI:
            gathered = self.comm.gather(records, root=0)
            records = [r for rank_records in gathered for r in rank_records] if self.rank == 0 else list()
        records = sorted(records, key=lambda r: int(r["trajectory"][0]))
        write_trajectories(self.data_manager,
                           np.concatenate(records) if records else np.zeros((0,), dtype=trajectory_dtype))

        acc = self.accumulator
        write_run_attrs(self.data_manager, self.config, version_string(), acc.n_trajectories, acc.n_divergent)
        res = resources['SimulationResource']
        write_grid(self.data_manager, res.grid)
        write_accumulator(self.data_manager, acc)
        for derived in ensemble_derived(acc, res.grid, res.scheme.gamma_dec, self.config.observables):
            write_derived(self.data_manager, derived.name, derived.data, axes=derived.axes, units=derived.units,
                          **derived.attrs)

        for stage in self.stages:
            stage.finish(self.generator.dset_name)

        for classname, resource in resources.items():
            resource.finish(self.generator.dset_name)

        self.data_manager.finish()

        total = acc.n_trajectories + acc.n_divergent
        fraction = acc.n_divergent / total if total else 0.
        if self.rank == 0:
            print(f'{acc.n_trajectories} trajectories accepted, {acc.n_divergent} divergent ({100 * fraction:.1f}%)')
        if fraction > self.config['run']['divergence_threshold']:
            raise RuntimeError(f'{acc.n_divergent} of {total} trajectories diverged, above the threshold of '
                               f'{self.config["run"]["divergence_threshold"]}')
