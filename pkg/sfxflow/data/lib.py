'''
    Layout of an sfxflow output file::

        /                       attrs: config_yaml, config_hash, version, seed, mode,
                                       n_trajectories, n_divergent
        /grid                   attrs: GridSpec fields
        /trajectories/data      trajectory_dtype table, one row per trajectory
        /observables/<name>/    attrs: axes, units, complex
            mean, m2, count, sem
        /derived/<name>         post-processed arrays (spectra, oracle)

'''
import logging

import numpy as np

from ..observables.accumulator import EnsembleAccumulator, RunningMoments
from ..physics.grid_domain import GridSpec

OBSERVABLE_GROUP = 'observables'
DERIVED_GROUP = 'derived'
TRAJECTORY_TABLE = 'trajectories'

trajectory_dtype = np.dtype([
    ('trajectory', 'u8'),
    ('seed', 'u8'),
    ('block', 'u4'),
    ('divergent', 'u1'),
    ('divergence_z', 'i4'),
    ('divergence_tau', 'i4'),
    ('photons_exit_re', 'f8', (2,)),
    ('photons_exit_im', 'f8', (2,)),
])


def trajectory_record(trajectory, seed, block, divergent=False, divergence_z=-1, divergence_tau=-1, photons_exit=None):
    '''
        Build one row of the trajectory table

        :param photons_exit: ``array`` shape ``(2,)``, complex photon number per polarization at the exit plane

        :returns: ``np.array`` of ``trajectory_dtype`` with shape ``(1,)``

    '''
    row = np.zeros((1,), dtype=trajectory_dtype)
    row['trajectory'] = trajectory
    row['seed'] = seed
    row['block'] = block
    row['divergent'] = divergent
    row['divergence_z'] = divergence_z
    row['divergence_tau'] = divergence_tau
    if photons_exit is not None:
        row['photons_exit_re'] = np.real(photons_exit)
        row['photons_exit_im'] = np.imag(photons_exit)
    return row


def write_trajectories(data_manager, records):
    '''
        Append ``records`` to the trajectory table. Collective under MPI;
        ranks without records pass an empty array.

    '''
    data_manager.create_dset(TRAJECTORY_TABLE, trajectory_dtype)
    records = np.asarray(records, dtype=trajectory_dtype).reshape(-1)
    sl = data_manager.reserve_data(TRAJECTORY_TABLE, len(records))
    if len(records):
        data_manager.write_data(TRAJECTORY_TABLE, sl, records)
    return sl


def write_accumulator(data_manager, accumulator, group=OBSERVABLE_GROUP):
    '''
        Store every observable of ``accumulator`` as
        ``<group>/<name>/{mean,m2,count,sem}``

        :param data_manager: ``SFXDataManager``

        :param accumulator: ``EnsembleAccumulator``

    '''
    for name in accumulator.names:
        moments = accumulator.moments[name]
        meta = accumulator.meta[name]
        path = f'{group}/{name}'
        axes = meta['axes']
        units = meta['units']
        data_manager.set_attrs(path, axes=','.join(axes), units=units, complex=moments.is_complex)
        data_manager.write_array(f'{path}/mean', moments.mean, axes=axes, units=units)
        data_manager.write_array(f'{path}/m2', moments.m2, axes=axes)
        data_manager.write_array(f'{path}/count', np.array(moments.count, dtype='u8'))
        data_manager.write_array(f'{path}/sem', moments.sem(), axes=axes, units=units)
    data_manager.set_attrs(group, n_trajectories=accumulator.n_trajectories,
                           n_divergent=accumulator.n_divergent)


def _observable_paths(fh, group):
    paths = list()

    def visit(name, obj):
        if name.endswith('/mean'):
            paths.append(name[:-len('/mean')])
    if group in fh:
        fh[group].visititems(visit)
    return sorted(paths)


def read_accumulator(data_manager, group=OBSERVABLE_GROUP):
    '''
        Rebuild an ``EnsembleAccumulator`` from ``<group>/...``

        :returns: ``EnsembleAccumulator``

    '''
    fh = data_manager.fh
    if group not in fh:
        raise RuntimeError(f'{data_manager.filepath} has no {group} group')
    acc = EnsembleAccumulator()
    for name in _observable_paths(fh, group):
        path = f'{group}/{name}'
        mean, axes, units = data_manager.read_array(f'{path}/mean')
        moments = RunningMoments(mean.shape, mean.dtype)
        moments.mean = np.array(mean, dtype=moments.mean.dtype)
        moments.m2 = np.array(fh[f'{path}/m2'][()], dtype=moments.m2.dtype)
        moments.count = int(fh[f'{path}/count'][()])
        acc.moments[name] = moments
        acc.meta[name] = dict(axes=axes, units=units)
    attrs = fh[group].attrs
    acc.n_trajectories = int(attrs.get('n_trajectories', 0))
    acc.n_divergent = int(attrs.get('n_divergent', 0))
    return acc


def write_grid(data_manager, grid):
    ''' Store ``GridSpec`` fields as attributes of ``/grid`` '''
    data_manager.set_attrs('grid', **grid.attrs())


def read_grid(data_manager):
    return GridSpec.from_attrs(dict(data_manager.get_attrs('grid')))


def write_run_attrs(data_manager, config, version, n_trajectories, n_divergent):
    '''
        Root attributes that make the file self-describing

    '''
    data_manager.set_attrs('/', config_yaml=config.to_yaml(), config_hash=config.hash, version=version,
                           seed=np.uint64(config['run']['seed']), mode=config.mode,
                           n_trajectories=n_trajectories, n_divergent=n_divergent)


def write_derived(data_manager, name, data, axes=(), units='', **attrs):
    return data_manager.write_array(f'{DERIVED_GROUP}/{name}', data, axes=axes, units=units, **attrs)


def check_config_hashes(hashes, sources=None):
    '''
        Refuse to combine outputs of different configurations

        :param hashes: ``list`` of ``str``

        :raises RuntimeError: on any mismatch

    '''
    sources = sources if sources is not None else [str(i) for i in range(len(hashes))]
    for h, source in zip(hashes[1:], sources[1:]):
        if h != hashes[0]:
            raise RuntimeError(f'config hash of {source} ({h[:12]}) does not match {sources[0]} ({hashes[0][:12]})')
    logging.debug(f'config hashes agree for {len(hashes)} files')
