import pytest
import os
import numpy as np

from sfxflow.data import SFXDataManager
from sfxflow.config import RunConfig
from sfxflow.physics import GridSpec, build_cu_kalpha1
from sfxflow import SFX_MPI

if SFX_MPI:
    from mpi4py import MPI
    comm = MPI.COMM_WORLD
    rank = comm.Get_rank()

    @pytest.fixture
    def testfile(mpi_tmp_path):
        path = os.path.join(mpi_tmp_path, 'test.h5')
        yield path
        if os.path.exists(path) and rank == 0:
            os.remove(path)
else:
    @pytest.fixture
    def testfile(tmp_path):
        path = os.path.join(tmp_path, 'test.h5')
        yield path
        if os.path.exists(path):
            os.remove(path)


@pytest.fixture
def datamanager(testfile):
    dm = SFXDataManager(testfile)
    return dm


@pytest.fixture
def grid():
    return GridSpec(nx=8, ny=8, nz=6, ntau=12, dx=20., dy=20., dz=500., dtau=0.5, wavelength=0.15406)


@pytest.fixture
def cu():
    return build_cu_kalpha1()


@pytest.fixture
def tiny_config_dict():
    return dict(
        grid=dict(nx=4, ny=4, nz=3, ntau=8, width_x='200 nm', width_y='200 nm', window='8 fs'),
        medium=dict(length='1.5 um', concentration='2 M'),
        pump=dict(energy='2 uJ', photon_energy='9 keV', fwhm_x='40 nm', fwhm_y='40 nm', fwhm_t='3 fs',
                  delay='4 fs'),
        run=dict(trajectories=6, seed=11, mode='full', block_size=2, divergence_threshold=0.5),
        output=dict(path='unused.h5', probes=['exit', 1]),
    )


@pytest.fixture
def tiny_config(tiny_config_dict):
    return RunConfig(tiny_config_dict)


@pytest.fixture
def example_config():
    return 'configs/example_config.yaml'
