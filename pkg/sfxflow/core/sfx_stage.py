import logging

from .. import SFX_MPI
if SFX_MPI:
    from mpi4py import MPI

comm = MPI.COMM_WORLD if SFX_MPI else None
rank = comm.Get_rank() if SFX_MPI else 0
size = comm.Get_size() if SFX_MPI else 1


class SFXStage(object):
    '''
        Base class for one operation of the per-τ-step integration loop.
        Provides the following attributes:

         - ``name``: instance name of stage (``run.stages`` entry)
         - ``classname``: stage class
         - ``class_version``: a ``str`` version number (``'major.minor.fix'``, default = ``'0.0.0'``)
         - ``data_manager``: an ``SFXDataManager`` instance used to access the output file
         - ``config``: the validated ``RunConfig``
         - ``comm``: MPI world communicator (if needed, else ``None``)
         - ``rank``: MPI group rank
         - ``size``: MPI group size

        For every trajectory and every τ step the manager calls ``run`` of
        each stage in order, handing over the mutable ``SystemState``. A
        stage that produces ensemble observables declares them in
        ``register`` and leaves one sample per observable in
        ``state.samples`` by the end of the trajectory.

        Example::

            class ExampleStage(SFXStage):
                class_version = '0.0.0'

                default_scale = 1.

                def __init__(self, **params):
                    super(ExampleStage, self).__init__(**params)
                    self.scale = params.get('scale', self.default_scale)

                def register(self, accumulator):
                    accumulator.register('ground_mean', (self.config.grid_spec().ntau,), dtype=float,
                                         axes=('tau',), units='')

                def run(self, trajectory, step, state):
                    state.samples.setdefault('ground_mean', np.zeros(state.grid.ntau))
                    state.samples['ground_mean'][step] = self.scale * state.rho_ground.real.mean()

    '''
    class_version = '0.0.0'

    def __init__(self, name, classname, data_manager, config, **params):
        self.name = name
        self.classname = classname
        self.data_manager = data_manager
        self.config = config

        self.comm = MPI.COMM_WORLD if SFX_MPI else None
        self.rank = self.comm.Get_rank() if SFX_MPI else 0
        self.size = self.comm.Get_size() if SFX_MPI else 1

        if self.rank == 0:
            print(f'create {self.name}: {self.classname}(' +
                  ', '.join([str(key) + '=' + str(val)
                             for key, val in params.items()]) + ')')

    def init(self, source_name):
        '''
            Called once before starting the loop. Used to prepare buffers and
            set file meta-data

            :returns: ``None``
        '''
        if self.rank == 0:
            print(f'{self.name}.init({source_name})')

    def register(self, accumulator):
        '''
            Declare the observables this stage samples on an (empty)
            ``EnsembleAccumulator``

        '''
        pass

    def run(self, trajectory, step, state):
        '''
            Called once per trajectory and τ step

            :param trajectory: ``int`` trajectory id

            :param step: ``int`` τ index

            :param state: ``SystemState`` of the trajectory

            :returns: ``None``
        '''
        logging.debug(f'{self.name}.run({trajectory}, {step})')

    def finish(self, source_name):
        '''
            Clean up any open files / etc, called once after run loop finishes

        '''
        if self.rank == 0:
            print(f'{self.name}.finish({source_name})')
