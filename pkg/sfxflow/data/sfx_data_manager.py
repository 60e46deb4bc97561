import h5py
import numpy as np

from .. import SFX_MPI
if SFX_MPI:
    from mpi4py import MPI


class SFXDataManager(object):
    '''
        Coordinates access to the output data file across multiple processes.

        To initialize::

            dm = SFXDataManager(<path to file>, mode=<'r'/'a'/'w'>, mpi=<True/False>)

        Opening and closing the underlying resource is handled automatically when
        using the dedicated file access API, e.g.::

            dm.dset_exists(...)
            dm.create_dset(...)
            dm.reserve_data(...)
            dm.write_data(...)
            dm.write_array(...)
            dm[...]

        Appendable tables live at ``<name>/data`` and grow along their first
        axis. Fixed-shape arrays (ensemble moments, derived quantities) are
        written with ``write_array`` and carry ``axes`` and ``units``
        attributes.

        Under MPI every rank must make the same sequence of structural calls
        (``create_dset``, ``reserve_data``, ``write_array``, ``set_attrs``);
        only rank 0 writes the contents of ``write_array``.

    '''

    def __init__(self, filepath, mode='a', mpi=SFX_MPI):
        self.filepath = filepath
        self._fh = None
        self.mpi_flag = mpi
        self.mode = mode

        self.comm = MPI.COMM_WORLD if self.mpi_flag else None
        self.rank = self.comm.Get_rank() if self.mpi_flag else 0
        self.size = self.comm.Get_size() if self.mpi_flag else 1

    def __repr__(self):
        return f'SFXDataManager(filepath={self.filepath}, mode={self.mode}, mpi={self.mpi_flag})'

    def __getitem__(self, args):
        '''
            Fetch an object or load a (partial) table::

                dm['observables/photon_flux/mean'] # h5py object at path
                dm['trajectories/data'] # the whole trajectory table as an h5py.Dataset
                dm['trajectories', :100] # first 100 rows of 'trajectories/data'

        '''
        if isinstance(args, str):
            return self.fh[args]
        name, sel = args
        if isinstance(sel, int):
            sel = slice(sel, sel + 1)
        return self.get_dset(name)[sel]

    def __enter__(self):
        return self

    def __exit__(self, type, value, traceback):
        self.finish()

    def finish(self):
        '''
            Close the file and wait for the other ranks

        '''
        self.close_file()
        if self.mpi_flag:
            self.comm.barrier()

    def _open_file(self, mpi, mode):
        self.close_file()
        if mpi:
            self._fh = h5py.File(self.filepath, mode, driver='mpio', comm=self.comm)
            self.comm.barrier()
        else:
            self._fh = h5py.File(self.filepath, mode)
        # truncate on the first open only, reopening appends
        if mode == 'w':
            self.mode = 'a'
        self.mpi_flag = mpi

    def close_file(self):
        if self._fh is not None and self._fh:
            self._fh.close()

    @property
    def fh(self):
        '''
            The open ``h5py.File``, (re)opened on first access

        '''
        if self._fh is None or not self._fh:
            self._open_file(self.mpi_flag, self.mode)
        return self._fh

    def delete(self, name):
        if name in self.fh:
            del self.fh[name]

    def exists(self, path):
        return path in self.fh

    def dset_exists(self, dataset_name):
        '''
            ``True`` if the table ``<dataset_name>/data`` exists

        '''
        return self.exists(f'{dataset_name}/data')

    def attr_exists(self, name, key):
        '''
            ``True`` if object ``name`` exists and carries attribute ``key``

        '''
        return self.exists(name) and key in self.fh[name].attrs

    def get_dset(self, dataset_name):
        '''
            :returns: ``h5py.Dataset`` of the table, e.g. ``trajectories`` -> ``trajectories/data``

        '''
        return self.fh[f'{dataset_name}/data']

    def get_attrs(self, name):
        return self.fh[name].attrs

    def set_attrs(self, name, **attrs):
        '''
            Update attributes of ``name``, creating a group if needed.
            ``None`` values are stored as empty strings::

                dm.set_attrs('/', config_hash=config.hash, seed=config['run']['seed'])

        '''
        fh = self.fh
        if name not in fh:
            fh.create_group(name)
        for key, val in attrs.items():
            fh[name].attrs[key] = '' if val is None else val

    def create_dset(self, dataset_name, dtype, shape=()):
        '''
            Create the appendable table ``<dataset_name>/data`` unless it
            exists already. ``dtype`` may be structured (see
            ``trajectory_dtype``), ``shape`` is the shape of one row.

        '''
        path = f'{dataset_name}/data'
        if path not in self.fh:
            self.fh.require_dataset(path, (0,) + shape, maxshape=(None,) + shape, dtype=dtype)

    def reserve_data(self, dataset_name, rows):
        '''
            Collectively grow ``dataset_name`` and hand each rank its rows.

             - ``int``: append ``rows`` rows per rank, placed in rank order after the current end
             - ``slice``: grow the table to cover every rank's slice, which is returned unchanged

            :returns: ``slice`` of the table reserved for this rank

        '''
        dset = self.get_dset(dataset_name)
        start = len(dset)
        requests = self.comm.allgather(rows) if self.mpi_flag else [rows]
        if isinstance(rows, (int, np.integer)) and not isinstance(rows, bool):
            dset.resize((start + sum(requests),) + dset.shape[1:])
            offset = start + sum(requests[:self.rank])
            return slice(offset, offset + rows)
        if isinstance(rows, slice):
            stop = max(r.stop for r in requests)
            if stop > start:
                dset.resize((stop,) + dset.shape[1:])
            return rows
        raise TypeError(f'cannot reserve {rows!r} rows of {dataset_name}, expected an integer or a slice')

    def write_data(self, dataset_name, rows, data):
        '''
            Write ``data`` into the reserved ``rows`` (a ``slice``) of ``dataset_name``

        '''
        dset = self.get_dset(dataset_name)
        if rows.stop > len(dset):
            raise RuntimeError(f'rows {rows.start}:{rows.stop} of {dataset_name} were never reserved '
                               f'(table has {len(dset)})')
        dset[rows] = data

    def write_array(self, name, data, axes=(), units='', **attrs):
        '''
            Create (or replace) a fixed-shape dataset at ``name``

            :param name: ``str`` path to dataset, e.g. ``observables/photon_flux/mean``

            :param data: ``array``, identical on every rank

            :param axes: ``tuple`` of ``str``, one label per dimension (stored comma separated)

            :param units: ``str``

            :returns: ``h5py.Dataset``

        '''
        data = np.asarray(data)
        if axes and len(axes) != data.ndim:
            raise ValueError(f'{name}: {len(axes)} axes for a {data.ndim}-dimensional array')
        self.delete(name)
        dset = self.fh.create_dataset(name, shape=data.shape, dtype=data.dtype)
        if self.rank == 0 or not self.mpi_flag:
            dset[...] = data
        dset.attrs['axes'] = ','.join(axes)
        dset.attrs['units'] = units
        for key, val in attrs.items():
            dset.attrs[key] = '' if val is None else val
        return dset

    def read_array(self, name):
        '''
            Load a dataset written by ``write_array``

            :returns: ``(data, axes, units)``

        '''
        dset = self.fh[name]
        axes = _to_str(dset.attrs.get('axes', ''))
        return dset[()], tuple(axes.split(',')) if axes else tuple(), _to_str(dset.attrs.get('units', ''))


def _to_str(value):
    return value.decode() if isinstance(value, bytes) else str(value)
