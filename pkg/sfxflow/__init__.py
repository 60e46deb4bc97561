#!/usr/bin/env python
import logging
import os
import sys

global SFX_MPI
if os.environ.get('SFX_NOMPI', False):
    logging.warning(f'Running without mpi4py because SFX_NOMPI={os.environ["SFX_NOMPI"]}')
    SFX_MPI = False
elif '--nompi' in sys.argv:
    logging.warning(f'Running without mpi4py because --nompi flag set')
    SFX_MPI = False
else:
    try:
        from mpi4py import MPI
        SFX_MPI = True
    except Exception as e:
        logging.warning(f'Running without mpi4py because {e}')
        SFX_MPI = False

from .config import RunConfig, ConfigError, load_config
from .core import SFXManager, resources, version_string
from .core.sfx_manager import __version__
from .data import (SFXDataManager, read_accumulator, read_grid, write_accumulator, write_grid, write_run_attrs,
                   write_derived, write_trajectories, check_config_hashes, trajectory_dtype, TRAJECTORY_TABLE,
                   OBSERVABLE_GROUP)
from .observables import EnsembleAccumulator, ensemble_derived
import argparse
import numpy as np

#: file axes and units of the oracle arrays
ORACLE_AXES = dict(
    oracle_correlation_J=(('probe', 'polarization', 'tau1', 'tau2'), 'photons fs^-1'),
    oracle_photon_number_vs_z=(('polarization', 'z'), 'photons'),
    oracle_photon_flux=(('polarization', 'tau', 'x', 'y'), 'photons nm^-2 fs^-1'),
    oracle_spectrum=(('row', 'omega'), 'fs^-1, photons'),
    oracle_hwhm=((), 'fs^-1'),
    oracle_rho_up=(('polarization', 'tau', 'z'), ''),
    oracle_gamma_dec=(('tau',), 'fs^-1'),
    oracle_pump_photons=(('z',), 'photons'),
    oracle_flux_norm=((), 'nm^2 fs^-1'),
)


def _rank():
    return MPI.COMM_WORLD.Get_rank() if SFX_MPI else 0


def _configure_logging(verbose, rank):
    log_level = {0: 'WARNING', 1: 'INFO', 2: 'DEBUG'}[min(verbose, 2)]
    logging.basicConfig(format=f'%(asctime)s (r{rank}) %(module)s.%(funcName)s[l%(lineno)d] %(levelname)s : %(message)s', level=log_level)
    logging.getLogger().setLevel(log_level)
    return log_level


def _output_path(output, config):
    if output is None:
        return config['output']['path']
    if os.path.isdir(output):
        return os.path.join(output, os.path.basename(config['output']['path']))
    return output


def run(config, output=None, trajectories=None, seed=None, mode=None, first_trajectory=None, verbose=0,
        nompi=False):
    '''
        Run the trajectory ensemble described by ``config``, truncating and
        writing the output file.

        :param config: ``str`` path to a yaml config, or a ``RunConfig``

        :param output: ``str``, output file (or directory) overriding ``output.path``

        :param trajectories: ``int``, override ``run.trajectories``

        :param seed: ``int``, override ``run.seed``

        :param mode: ``str``, override ``run.mode``

        :param first_trajectory: ``int``, override ``run.first_trajectory``

        :param verbose: ``int``, verbosity level (``0 = warnings only``, ``1 = info``, ``2 = debug``)

        :param nompi: ``bool`` flag to force run without MPI

        :returns: ``SFXManager`` after finishing

    '''
    global SFX_MPI
    if nompi == True and SFX_MPI:
        SFX_MPI = False
    rank = _rank()
    log_level = _configure_logging(verbose, rank)

    overrides = {'run.trajectories': trajectories, 'run.seed': seed, 'run.mode': mode,
                 'run.first_trajectory': first_trajectory}
    if isinstance(config, RunConfig):
        config = config.override(**overrides)
    else:
        config = load_config(config, **overrides)
    output_filename = _output_path(output, config)

    if rank == 0:
        print('~~~ SFXFLOW ~~~')
        print(f'config: {config.source}')
        print(f'output file: {output_filename}')
        print(f'mode: {config.mode}')
        print(f'trajectories: {config["run"]["first_trajectory"]} : '
              f'{config["run"]["first_trajectory"] + config["run"]["trajectories"]}')
        print(f'seed: {config["run"]["seed"]}')
        if nompi is not False:
            print(f'no mpi: {nompi}')
        if verbose > 0:
            print(f'verbose: {log_level}')
            print(config.to_yaml())
        print('~~~~~~~~~~~~~~\n')

    if rank == 0:
        print('~~~ INIT ~~~')
    manager = SFXManager(config, output_filename)
    manager.init()
    if rank == 0:
        print('~~~~~~~~~~~~\n')

    if rank == 0:
        print('~~~ RUN ~~~')
    manager.run()
    if rank == 0:
        print('~~~~~~~~~~~\n')

    if rank == 0:
        print('~~~ FINISH ~~~')
    manager.finish()
    if rank == 0:
        print('~~~~~~~~~~~~~~\n')
    return manager


def merge_outputs(files, output, verbose=0):
    '''
        Combine the ensembles of several run files of the same configuration
        into a new file. Accumulators are merged in the given order and the
        derived quantities are recomputed from the merged means.

        :param files: ``list`` of ``str``, run output files

        :param output: ``str``, path of the merged file (truncated)

        :returns: merged ``EnsembleAccumulator``

    '''
    rank = _rank()
    _configure_logging(verbose, rank)
    if rank != 0:
        return None
    if len(files) < 1:
        raise RuntimeError('no files to merge')

    accumulators, hashes, tables = list(), list(), list()
    for path in files:
        if not os.path.exists(path):
            raise OSError(f'{path} not found')
        with SFXDataManager(path, mode='r', mpi=False) as dm:
            attrs = dm.get_attrs('/')
            if 'config_hash' not in attrs:
                raise RuntimeError(f'{path} is not an sfxflow run file')
            hashes.append(str(attrs['config_hash']))
            if path == files[0]:
                config = RunConfig.from_yaml(str(attrs['config_yaml']))
                grid = read_grid(dm)
                observable_attrs = dict((k, v) for k, v in dm.get_attrs(OBSERVABLE_GROUP).items()
                                        if k not in ('n_trajectories', 'n_divergent'))
            accumulators.append(read_accumulator(dm))
            tables.append(np.array(dm.get_dset(TRAJECTORY_TABLE)[:]) if dm.dset_exists(TRAJECTORY_TABLE)
                          else np.zeros((0,), dtype=trajectory_dtype))
        logging.info(f'read {path}: {accumulators[-1]!r}')
    check_config_hashes(hashes, files)

    merged = EnsembleAccumulator.merged(accumulators)
    table = np.concatenate(tables)
    config = config.override(**{'run.trajectories': max(len(table), 1),
                                'run.first_trajectory': int(table['trajectory'].min()) if len(table) else 0})
    scheme, _ = config.atomic_model()

    print(f'merge {len(files)} files -> {output}: {merged.n_trajectories} trajectories, '
          f'{merged.n_divergent} divergent')
    with SFXDataManager(output, mode='w', mpi=False) as dm:
        write_trajectories(dm, table)
        write_run_attrs(dm, config, version_string(), merged.n_trajectories, merged.n_divergent)
        write_grid(dm, grid)
        dm.set_attrs(OBSERVABLE_GROUP, **observable_attrs)
        write_accumulator(dm, merged)
        for derived in ensemble_derived(merged, grid, scheme.gamma_dec, config.observables):
            write_derived(dm, derived.name, derived.data, axes=derived.axes, units=derived.units, **derived.attrs)
    return merged


def oracle(config, output=None, verbose=0):
    '''
        Evaluate the analytic spontaneous-emission oracle for ``config`` and
        append it under ``/derived/oracle_*`` of the output file

        :returns: ``dict`` of oracle arrays

    '''
    from .physics import run_oracle

    rank = _rank()
    _configure_logging(verbose, rank)
    config = config if isinstance(config, RunConfig) else load_config(config)
    if rank != 0:
        return None
    output_filename = _output_path(output, config)

    print('~~~ ORACLE ~~~')
    print(f'config: {config.source}')
    print(f'output file: {output_filename}')
    results = run_oracle(config)
    with SFXDataManager(output_filename, mode='a', mpi=False) as dm:
        for name, value in results.items():
            axes, units = ORACLE_AXES.get(name, ((), ''))
            value = np.asarray(value)
            write_derived(dm, name, value, axes=axes if len(axes) == value.ndim else (), units=units)
        dm.set_attrs('derived', oracle_config_hash=config.hash, oracle_version=version_string())
    print(f'spectrum HWHM {float(results["oracle_hwhm"]):g} fs^-1')
    print('~~~~~~~~~~~~~~\n')
    return results


def validate(config, verbose=0):
    '''
        Load and check a config without running it

        :returns: ``RunConfig``

    '''
    _configure_logging(verbose, _rank())
    config = load_config(config)
    grid = config.grid_spec()
    scheme, table = config.atomic_model()
    if _rank() == 0:
        print(f'{config!r}')
        print(f'{grid!r}')
        print(f'{scheme!r}')
        print(f'stages: {" -> ".join(config.stages)}')
        print(f'observables: {", ".join(config.observables)}')
        print(f'probe planes: {config.probe_planes()}')
    return config


def _parser():
    parser = argparse.ArgumentParser(prog='sfxflow',
                                     description='Stochastic Maxwell-Bloch simulation of x-ray emission')
    parser.add_argument('--version', action='version', version=__version__)
    subparsers = parser.add_subparsers(dest='command', required=True)

    def common(sub):
        sub.add_argument('--verbose', '-v', action='count', default=0,
                         help='''Increase verbosity, can specify more for more verbose (e.g. -vv)''')
        sub.add_argument('--nompi', action='store_true', default=False,
                         help='''run without mpi enabled (can also be disabled by setting SFX_NOMPI)''')

    p_run = subparsers.add_parser('run', help='run a trajectory ensemble')
    p_run.add_argument('--config', '-c', type=str, required=True, help='''yaml config file''')
    p_run.add_argument('--trajectories', '-n', type=int, default=None, help='''number of trajectories''')
    p_run.add_argument('--first-trajectory', dest='first_trajectory', type=int, default=None,
                       help='''id of the first trajectory (for partial runs to be merged)''')
    p_run.add_argument('--seed', '-s', type=int, default=None, help='''64-bit master seed''')
    p_run.add_argument('--output', '-o', type=str, default=None, help='''output hdf5 file or directory''')
    p_run.add_argument('--mode', '-m', type=str, default=None,
                       help='''full, spontaneous, pump-only or deterministic''')
    common(p_run)

    p_merge = subparsers.add_parser('merge', help='merge run files of one configuration')
    p_merge.add_argument('files', type=str, nargs='+', help='''run output files''')
    p_merge.add_argument('--output', '-o', type=str, required=True, help='''merged output file''')
    common(p_merge)

    p_oracle = subparsers.add_parser('oracle', help='write the analytic spontaneous-emission oracle')
    p_oracle.add_argument('--config', '-c', type=str, required=True, help='''yaml config file''')
    p_oracle.add_argument('--output', '-o', type=str, default=None, help='''output hdf5 file or directory''')
    common(p_oracle)

    p_validate = subparsers.add_parser('validate', help='check a config file')
    p_validate.add_argument('--config', '-c', type=str, required=True, help='''yaml config file''')
    common(p_validate)
    return parser


def main(argv=None):
    '''
        Entry point for command line execution. Parses arguments and runs
        the requested subcommand. Returns the process exit code: ``0`` on
        success, ``1`` for configuration and runtime errors (usage errors
        exit with ``2`` from argparse).

    '''
    args = vars(_parser().parse_args(argv))
    command = args.pop('command')
    try:
        if command == 'run':
            run(**args)
        elif command == 'merge':
            args.pop('nompi')
            merge_outputs(**args)
        elif command == 'oracle':
            args.pop('nompi')
            oracle(**args)
        elif command == 'validate':
            args.pop('nompi')
            validate(**args)
    except ConfigError as e:
        print(f'sfxflow {command}: config error: {e}', file=sys.stderr)
        return 1
    except (RuntimeError, OSError) as e:
        print(f'sfxflow {command}: {e}', file=sys.stderr)
        return 1
    return 0
