import pytest
import os
import h5py
import numpy as np

import sfxflow
from sfxflow import run, merge_outputs, oracle, validate, main, SFX_MPI

if SFX_MPI:
    from mpi4py import MPI
    comm = MPI.COMM_WORLD
    rank = comm.Get_rank()
else:
    comm = None
    rank = 0


def _other(testfile, name):
    return os.path.join(os.path.dirname(testfile), name)


def _close(a, b):
    # merge order changes the rounding of means that are sums of cancelling samples
    return np.allclose(a, b, rtol=1e-9, atol=1e-12 * np.abs(b).max())


def test_validate(example_config):
    config = validate(example_config)
    assert config.grid_spec().nz == 40
    assert main(['validate', '--config', example_config]) == 0


def test_version(capsys):
    with open(os.path.join(os.path.dirname(__file__), '..', 'VERSION')) as fh:
        assert sfxflow.__version__ == fh.read().strip()
    with pytest.raises(SystemExit) as excinfo:
        main(['--version'])
    assert excinfo.value.code == 0
    assert sfxflow.__version__ in capsys.readouterr().out


def test_cli_errors(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(['run'])
    assert excinfo.value.code == 2

    path = tmp_path / 'bad.yaml'
    path.write_text('grid:\n    colour: red\n')
    assert main(['validate', '-c', str(path)]) == 1
    assert main(['validate', '-c', str(tmp_path / 'missing.yaml')]) == 1
    if rank == 0:
        assert main(['merge', str(tmp_path / 'missing.h5'), '-o', str(tmp_path / 'out.h5')]) == 1


def test_example(testfile, tiny_config):
    run(tiny_config, testfile, verbose=2)

    with h5py.File(testfile, 'r') as f:
        assert f.attrs['config_hash'] == tiny_config.hash
        assert f.attrs['n_trajectories'] + f.attrs['n_divergent'] == 6
        table = f['trajectories/data'][:]
        assert list(table['trajectory']) == list(range(6))
        assert f['grid'].attrs['nz'] == 3

        obs = f['observables']
        assert list(obs.attrs['probe_planes']) == [1, 3]
        assert obs['photon_flux/mean'].shape == (2, 2, 8, 4, 4)
        assert obs['correlation_J/mean'].shape == (2, 2, 8, 8)
        assert obs['photon_flux/count'][()] == f.attrs['n_trajectories']
        pump = obs['pump_photons/mean'][:]
        assert np.all(np.diff(pump) < 0)
        assert np.all(obs['ground_state_after_pump/mean'][:] <= 1)
        assert obs['wigner/mean'].attrs['axes'] == 'polarization,omega,tau'

        assert 'spectrum' in f['derived']
        assert 'transform_limited' in f['derived']
        assert f['derived/transverse_correlation_width'].shape == (2, 2)


def test_deterministic_without_seed(testfile, tiny_config):
    run(tiny_config, testfile, mode='deterministic', trajectories=2)
    with h5py.File(testfile, 'r') as f:
        assert f.attrs['mode'] == 'deterministic'
        assert f.attrs['n_divergent'] == 0
        assert np.all(f['observables/photon_number_vs_z/mean'][:] == 0)
        assert np.any(f['observables/effective_inversion/mean'][:] > 0)


def test_pump_only(testfile, tiny_config):
    run(tiny_config, testfile, mode='pump-only', trajectories=1)
    with h5py.File(testfile, 'r') as f:
        assert 'photon_flux' not in f['observables']
        assert 'pump_photons' in f['observables']
        assert 'spectrum' not in f.get('derived', dict())


def test_block_size_independence(testfile, tiny_config):
    other = _other(testfile, 'blocks.h5')
    run(tiny_config, testfile)
    run(tiny_config.override(**{'run.block_size': 4}), other)
    with h5py.File(testfile, 'r') as a, h5py.File(other, 'r') as b:
        assert np.array_equal(a['trajectories/data']['photons_exit_re'], b['trajectories/data']['photons_exit_re'])
        assert np.array_equal(a['trajectories/data']['divergent'], b['trajectories/data']['divergent'])
        assert _close(a['observables/photon_rate_vs_z/mean'][:], b['observables/photon_rate_vs_z/mean'][:])


def test_merge(testfile, tiny_config):
    first, second, merged = (_other(testfile, name) for name in ('first.h5', 'second.h5', 'merged.h5'))
    run(tiny_config, testfile)
    run(tiny_config, first, trajectories=3)
    run(tiny_config, second, trajectories=3, first_trajectory=3)

    if rank == 0:
        acc = merge_outputs([first, second], merged)
        assert acc.n_trajectories + acc.n_divergent == 6
        with h5py.File(testfile, 'r') as whole, h5py.File(merged, 'r') as f:
            assert f.attrs['config_hash'] == whole.attrs['config_hash']
            assert f.attrs['n_trajectories'] == whole.attrs['n_trajectories']
            assert list(f['trajectories/data']['trajectory']) == list(range(6))
            for name in ('photon_flux', 'correlation_J', 'pump_photons', 'effective_inversion'):
                assert _close(f[f'observables/{name}/mean'][:], whole[f'observables/{name}/mean'][:])
            assert _close(f['derived/spectrum'][:], whole['derived/spectrum'][:])


def test_merge_refuses_other_config(testfile, tiny_config):
    other = _other(testfile, 'other.h5')
    run(tiny_config, testfile, trajectories=2)
    run(tiny_config, other, trajectories=2, seed=12)
    if rank == 0:
        with pytest.raises(RuntimeError):
            merge_outputs([testfile, other], _other(testfile, 'merged.h5'))


def test_divergence_threshold(testfile, tiny_config):
    config = tiny_config.override(**{'run.rho_max': 1e-12, 'run.divergence_threshold': 0.})
    with pytest.raises(RuntimeError):
        run(config, testfile, trajectories=2)
    with h5py.File(testfile, 'r') as f:
        assert f.attrs['n_divergent'] == 2
        assert np.all(f['trajectories/data']['divergent'] == 1)
        assert np.all(f['trajectories/data']['divergence_tau'] >= 0)


def test_oracle_appends(testfile, tiny_config):
    config = tiny_config.override(**{'run.mode': 'spontaneous'})
    run(config, testfile, trajectories=2)
    results = oracle(config, testfile)
    if rank == 0:
        assert results['oracle_correlation_J'].shape == (2, 2, 8, 8)
        with h5py.File(testfile, 'r') as f:
            assert 'photon_flux' in f['observables']
            assert f['derived/oracle_correlation_J'].attrs['axes'] == 'probe,polarization,tau1,tau2'
            assert f['derived'].attrs['oracle_config_hash'] == config.hash


def test_ensemble_symmetries(testfile, tiny_config):
    config = tiny_config.override(**{'run.mode': 'spontaneous'})
    run(config, testfile, trajectories=200)
    if rank != 0:
        return
    with h5py.File(testfile, 'r') as f:
        obs = f['observables']
        J, J_sem = obs['correlation_J/mean'][:], obs['correlation_J/sem'][:]
        N, N_sem = obs['photon_number_vs_z/mean'][:], obs['photon_number_vs_z/sem'][:]
        flux, flux_sem = obs['photon_flux/mean'][:], obs['photon_flux/sem'][:]

    # photon numbers are real on average
    atol = 1e-9 * np.abs(N).max()
    assert np.all(N.real[:, -1] > 0)
    assert np.all(np.abs(N.imag) <= 4 * N_sem.imag + atol)
    total, total_sem = flux.sum(axis=(-2, -1)), flux_sem.sum(axis=(-2, -1))
    assert np.all(np.abs(total.imag) <= 4 * total_sem.imag + 1e-9 * np.abs(total).max())

    # <J(t1, t2)> = conj <J(t2, t1)>
    T = np.swapaxes(J, -1, -2)
    T_sem = np.swapaxes(J_sem, -1, -2)
    atol = 1e-9 * np.abs(J).max()
    assert np.all(np.abs(J.real - T.real) <= 4 * (J_sem.real + T_sem.real) + atol)
    assert np.all(np.abs(J.imag + T.imag) <= 4 * (J_sem.imag + T_sem.imag) + atol)
