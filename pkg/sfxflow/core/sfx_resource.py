from .. import SFX_MPI
if SFX_MPI:
    from mpi4py import MPI


resources = dict()


class SFXResource(object):
    '''
        Base class for a static resource shared by the generator and every
        stage of a run (grid, level scheme, propagators, ...). Provides:

         - ``classname``: resource class
         - ``class_version``: a ``str`` version number (``'major.minor.fix'``, default = ``'0.0.0'``)
         - ``data_manager``: an ``SFXDataManager`` instance used to access the output file
         - ``config``: the validated ``RunConfig``
         - ``comm``: MPI world communicator (if needed, else ``None``)
         - ``rank``: MPI group rank
         - ``size``: MPI group size

        To build a custom resource, implement the ``init()`` or ``finish()`` methods.

        Resources are created by the ``SFXManager`` and accessed from a stage
        or generator via::

            from sfxflow.core import resources

            resources['SimulationResource']

    '''
    class_version = '0.0.0'

    def __init__(self, classname, data_manager, config, **params):
        self.classname = classname
        self.data_manager = data_manager
        self.config = config

        self.comm = MPI.COMM_WORLD if SFX_MPI else None
        self.rank = self.comm.Get_rank() if SFX_MPI else 0
        self.size = self.comm.Get_size() if SFX_MPI else 1

        if self.rank == 0:
            print(f'create {classname}()')

    def init(self, source_name):
        '''
            Called once before starting the loop and before generator has been
            initialized. Used to build derived data or configure resource.

            :returns: ``None``
        '''
        if self.rank == 0:
            print(f'{self.classname}.init({source_name})')

    def finish(self, source_name):
        '''
            Called once after finishing loop and after generators and stages
            have finished.

            :returns None:
        '''
        if self.rank == 0:
            print(f'{self.classname}.finish({source_name})')
