import pytest
import numpy as np

from sfxflow.data import (SFXDataManager, trajectory_record, trajectory_dtype, write_trajectories, write_accumulator,
                          read_accumulator, write_grid, read_grid, write_run_attrs, write_derived,
                          check_config_hashes, TRAJECTORY_TABLE)
from sfxflow.observables import EnsembleAccumulator
from sfxflow import SFX_MPI

if SFX_MPI:
    from mpi4py import MPI
    comm = MPI.COMM_WORLD
    rank = comm.Get_rank()
    size = comm.Get_size()
else:
    comm = None
    rank = 0
    size = 1


def test_init(testfile, datamanager):
    # check that filepath was intialized correctly
    assert datamanager.filepath == testfile
    # check that file opens ok
    assert datamanager.fh
    # check that the file closes ok
    datamanager.close_file()
    assert not datamanager._fh
    # check that file (re)opens ok
    assert datamanager.fh


@pytest.fixture
def empty_testdset(datamanager):
    name = 'test/test'
    datamanager.create_dset(name, int)
    return name


def test_create_dset(datamanager, empty_testdset):
    dm = datamanager
    assert dm.dset_exists(empty_testdset)
    assert dm.get_dset(empty_testdset).dtype == int
    assert len(dm.get_dset(empty_testdset)) == 0
    # creating twice is a no-op
    dm.create_dset(empty_testdset, int)
    assert len(dm.get_dset(empty_testdset)) == 0


def test_setattr(datamanager, empty_testdset):
    dm = datamanager
    dm.set_attrs('test', test=123, missing=None)
    assert dm.get_attrs('test')['test'] == 123
    assert dm.attr_exists('test', 'missing')
    assert not dm.attr_exists('nowhere', 'test')


@pytest.fixture
def full_testdset(datamanager, empty_testdset):
    dm = datamanager
    sl = dm.reserve_data(empty_testdset, 100)
    dm.write_data(empty_testdset, sl, rank)
    return empty_testdset, sl


def test_write_dset(datamanager, full_testdset):
    dm = datamanager
    # check that we have access to the *full* dataset after writing
    assert len(dm.get_dset(full_testdset[0])) == size * 100
    # check that processes wrote to correct region
    assert all(dm.get_dset(full_testdset[0])[full_testdset[1]] == rank)
    with pytest.raises(RuntimeError):
        dm.write_data(full_testdset[0], slice(size * 100, size * 100 + 1), 0)
    with pytest.raises(TypeError):
        dm.reserve_data(full_testdset[0], 1.5)


def test_getitem(datamanager, full_testdset):
    dm = datamanager
    assert dm.get_dset(full_testdset[0]) == dm[full_testdset[0] + '/data']
    assert len(dm[full_testdset[0], :10]) == 10
    assert np.all(dm[full_testdset[0], :10] == dm.get_dset(full_testdset[0])[:10])
    assert len(dm[full_testdset[0], 0]) == 1


def test_array(datamanager):
    dm = datamanager
    data = np.arange(6.).reshape(2, 3) * (1 + 1j)
    dm.write_array('derived/test', data, axes=('polarization', 'tau'), units='fs^-1', note='x')
    out, axes, units = dm.read_array('derived/test')
    assert np.array_equal(out, data)
    assert axes == ('polarization', 'tau')
    assert units == 'fs^-1'
    assert dm['derived/test'].attrs['note'] == 'x'
    # rewriting replaces the dataset
    dm.write_array('derived/test', np.zeros(4))
    assert dm.read_array('derived/test')[1] == tuple()
    with pytest.raises(ValueError):
        dm.write_array('derived/bad', data, axes=('tau',))


def test_context(testfile):
    with SFXDataManager(testfile, 'a', mpi=SFX_MPI) as dm:
        dm.create_dset('test', int)
        assert dm['test']


def test_repr(datamanager):
    print(datamanager)


def test_trajectories(datamanager):
    records = np.concatenate([trajectory_record(rank * 3 + i, 11, 0, photons_exit=np.array([1 + 2j, 3.]))
                              for i in range(3)])
    records[-1] = trajectory_record(rank * 3 + 2, 11, 0, divergent=True, divergence_z=2, divergence_tau=5)[0]
    sl = write_trajectories(datamanager, records)
    assert sl.stop - sl.start == 3
    table = datamanager[TRAJECTORY_TABLE, :]
    assert table.dtype == trajectory_dtype
    assert len(table) == 3 * size
    assert sorted(table['trajectory']) == list(range(3 * size))
    assert table['photons_exit_im'][0, 0] == 2
    assert np.count_nonzero(table['divergent']) == size

    write_trajectories(datamanager, np.zeros((0,), dtype=trajectory_dtype))
    assert len(datamanager[TRAJECTORY_TABLE, :]) == 3 * size


def test_accumulator_roundtrip(datamanager):
    acc = EnsembleAccumulator()
    acc.register('photon_flux', (2, 3), complex, axes=('polarization', 'tau'), units='photons nm^-2 fs^-1')
    acc.register('pump_photons', (4,), float, axes=('plane',), units='photons')
    rng = np.random.default_rng(0)
    for _ in range(5):
        acc.add_trajectory(dict(photon_flux=rng.normal(size=(2, 3)) + 1j, pump_photons=rng.normal(size=4)))
    acc.add_divergent()
    write_accumulator(datamanager, acc)

    loaded = read_accumulator(datamanager)
    assert sorted(loaded.names) == ['photon_flux', 'pump_photons']
    assert loaded.n_trajectories == 5
    assert loaded.n_divergent == 1
    assert loaded.count('photon_flux') == 5
    assert np.array_equal(loaded.mean('photon_flux'), acc.mean('photon_flux'))
    assert np.allclose(loaded.sem('pump_photons'), acc.sem('pump_photons'))
    assert loaded.meta['photon_flux']['axes'] == ('polarization', 'tau')
    assert loaded.meta['pump_photons']['units'] == 'photons'
    assert np.array_equal(datamanager['observables/photon_flux/sem'][()], acc.sem('photon_flux'))

    with pytest.raises(RuntimeError):
        read_accumulator(datamanager, group='elsewhere')


def test_grid_and_run_attrs(datamanager, grid, tiny_config):
    write_grid(datamanager, grid)
    assert read_grid(datamanager) == grid
    write_run_attrs(datamanager, tiny_config, '1.0.0', 6, 0)
    attrs = datamanager.get_attrs('/')
    assert attrs['config_hash'] == tiny_config.hash
    assert attrs['mode'] == 'full'
    assert int(attrs['seed']) == 11
    write_derived(datamanager, 'spectrum_omega', np.linspace(-1, 1, 5), axes=('omega',), units='fs^-1')
    assert datamanager.read_array('derived/spectrum_omega')[2] == 'fs^-1'


def test_check_config_hashes():
    check_config_hashes(['a' * 64] * 3)
    with pytest.raises(RuntimeError):
        check_config_hashes(['a' * 64, 'b' * 64], ['run0.h5', 'run1.h5'])
