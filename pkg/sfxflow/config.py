'''
    Run configuration: YAML loading, unit parsing, defaults and validation.

    A run config is a YAML mapping with the sections ``grid``, ``medium``,
    ``pump``, ``physics``, ``run`` and ``output``. Every dimensioned value
    accepts either a bare number (interpreted in the canonical unit listed in
    ``CANONICAL_UNITS``) or a string with an explicit unit suffix::

        pump:
            energy: 250 uJ
            photon_energy: 9 keV
            fwhm_x: 200 nm
        medium:
            length: 270 um
            concentration: 8 M

    Keys can also be addressed with dotted names (``pump.energy``) through
    ``RunConfig.get`` and ``RunConfig.override``.

'''
import copy
import hashlib
import logging
import os
import re

import yaml
from yamlinclude import YamlIncludeConstructor


class ConfigError(ValueError):
    '''
        Raised when a configuration value is missing, malformed or
        inconsistent. ``key`` holds the dotted name of the offending entry.

    '''

    def __init__(self, message, key=None):
        super(ConfigError, self).__init__(message)
        self.key = key

    def __str__(self):
        msg = super(ConfigError, self).__str__()
        return f'{self.key}: {msg}' if self.key is not None else msg


CANONICAL_UNITS = dict(
    length='nm',
    time='fs',
    energy='uJ',
    photon_energy='keV',
    concentration='M',
    rate='fs^-1',
    area='nm^2',
)

UNITS = dict(
    length={'pm': 1e-3, 'A': 1e-1, 'nm': 1., 'um': 1e3, 'μm': 1e3, 'mm': 1e6, 'm': 1e9},
    time={'as': 1e-3, 'fs': 1., 'ps': 1e3, 'ns': 1e6},
    energy={'nJ': 1e-3, 'uJ': 1., 'μJ': 1., 'mJ': 1e3, 'J': 1e6},
    photon_energy={'eV': 1e-3, 'keV': 1.},
    concentration={'mM': 1e-3, 'M': 1.},
    rate={'as^-1': 1e3, '1/as': 1e3, 'fs^-1': 1., '1/fs': 1., 'ps^-1': 1e-3, '1/ps': 1e-3},
    area={'nm^2': 1., 'A^2': 1e-2, 'cm^2': 1e14, 'b': 1e-10, 'kb': 1e-7, 'Mb': 1e-4},
)

#: copper atoms per nm^3 per mol/L
AVOGADRO_PER_NM3 = 6.02214076e23 * 1e-24

MODES = ('full', 'spontaneous', 'pump-only', 'deterministic')

#: observables that need the emitted field, rejected in pump-only mode
FIELD_OBSERVABLES = (
    'photon_flux',
    'photon_rate_vs_z',
    'photon_number_vs_z',
    'correlation_J',
    'spectral_angular',
    'wigner',
    'transform_limited',
    'transverse_correlation',
    'stokes',
    'polarization_correlation',
    'axis_history',
    'conjugate_norms',
)

#: observables computed from atomic and pump variables only
MEDIUM_OBSERVABLES = (
    'effective_inversion',
    'gain_coefficient',
    'polarization_fields',
    'bloch_vector',
    'pump_photons',
    'pump_fluence',
    'ground_state_after_pump',
)

OBSERVABLES = FIELD_OBSERVABLES + MEDIUM_OBSERVABLES

DEFAULT_STAGES = ('pump', 'field', 'bloch', 'noise', 'probe')

# key: (kind, default)
SCHEMA = dict(
    grid=dict(
        nx=('count', 64),
        ny=('count', 64),
        nz=('count', 40),
        ntau=('count', 180),
        width_x=('length', 900.),
        width_y=('length', 900.),
        window=('time', 37.),
        window_start=('time', 0.),
        wavelength=('length', 0.15406),
    ),
    medium=dict(
        length=('length', 270e3),
        concentration=('concentration', 8.),
        profile=('choice:uniform,gaussian', 'uniform'),
        profile_fwhm=('length', None),
    ),
    pump=dict(
        energy=('energy', 250.),
        photon_energy=('photon_energy', 9.),
        fwhm_x=('length', 200.),
        fwhm_y=('length', 200.),
        fwhm_t=('time', 11.7),
        delay=('time', 15.),
    ),
    physics=dict(
        gamma_rad=('rate', 0.88),
        gamma_upper=('rate', 2.24),
        gamma_lower=('rate', 0.92),
        detunings=('rate_list', None),
        cross_section_file=('path', None),
        cross_sections=('area_map', dict()),
        refraction=('float', 0.),
        field_absorption=('bool', True),
        drift_gauge=('bool', True),
        spectral_mask=('bool', True),
        mask_fraction=('fraction', 0.1),
        seed_amplitude=('rate', 0.),
        seed_polarization=('polarization', 1),
        seed_fwhm_x=('length', 200.),
        seed_fwhm_y=('length', 200.),
        seed_fwhm_t=('time', 5.),
        seed_delay=('time', 15.),
        seed_file=('path', None),
        seed_dataset=('str', 'seed'),
    ),
    run=dict(
        trajectories=('positive', 100),
        first_trajectory=('index', 0),
        seed=('seed', 0),
        mode=('choice:' + ','.join(MODES), 'full'),
        n_smooth=('positive', 2),
        eps_g=('nonnegative', 1e-8),
        rho_max=('nonnegative', 1e3),
        divergence_threshold=('fraction', 0.05),
        block_size=('positive', 8),
        stages=('str_list', None),
        stage_params=('mapping', dict()),
    ),
    output=dict(
        path=('path', 'sfxflow_output.h5'),
        observables=('observables', None),
        probes=('probes', ['exit']),
        probe_tau=('time', None),
        polarization_shift=('index', 8),
    ),
)

_quantity_re = re.compile(r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$')


def _unit_dimension(unit):
    for dim, table in UNITS.items():
        if unit in table:
            return dim
    return None


def parse_quantity(value, dimension, key=None):
    '''
        Convert ``value`` to a float in the canonical unit of ``dimension``

        :param value: ``int``, ``float`` or ``str`` like ``'250 uJ'``

        :param dimension: ``str``, one of ``UNITS``

        :param key: ``str``, dotted config key for error reporting

        :returns: ``float``

    '''
    if isinstance(value, bool):
        raise ConfigError(f'expected a {dimension}, got {value}', key=key)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f'expected a {dimension}, got {value!r}', key=key)
    match = _quantity_re.match(value)
    if match is None:
        raise ConfigError(f'cannot parse "{value}" as a {dimension}', key=key)
    number, unit = float(match.group(1)), match.group(2)
    if not unit:
        return number
    table = UNITS[dimension]
    if unit not in table:
        other = _unit_dimension(unit)
        if other is not None:
            raise ConfigError(f'unit "{unit}" is a {other}, expected a {dimension}', key=key)
        raise ConfigError(f'unknown unit "{unit}" (known: {", ".join(table)})', key=key)
    return number * table[unit]


def _parse_value(kind, value, key):
    if value is None:
        return None
    if kind in UNITS:
        return parse_quantity(value, kind, key)
    if kind == 'count':
        if isinstance(value, bool) or not isinstance(value, int) or value < 2:
            raise ConfigError(f'expected an integer >= 2, got {value!r}', key=key)
        return int(value)
    if kind == 'positive':
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f'expected a positive integer, got {value!r}', key=key)
        return int(value)
    if kind == 'index':
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise ConfigError(f'expected a non-negative integer, got {value!r}', key=key)
        return int(value)
    if kind == 'seed':
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
            raise ConfigError(f'expected an unsigned 64-bit seed, got {value!r}', key=key)
        return int(value)
    if kind in ('float', 'nonnegative', 'fraction'):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f'expected a number, got {value!r}', key=key)
        if kind == 'nonnegative' and value < 0:
            raise ConfigError(f'expected a non-negative number, got {value}', key=key)
        if kind == 'fraction' and not 0 <= value <= 1:
            raise ConfigError(f'expected a number in [0, 1], got {value}', key=key)
        return value
    if kind == 'bool':
        if not isinstance(value, bool):
            raise ConfigError(f'expected true/false, got {value!r}', key=key)
        return value
    if kind in ('str', 'path'):
        return str(value)
    if kind == 'polarization':
        if value not in (-1, 1):
            raise ConfigError(f'polarization must be -1 or +1, got {value!r}', key=key)
        return int(value)
    if kind.startswith('choice:'):
        choices = kind[len('choice:'):].split(',')
        if value not in choices:
            raise ConfigError(f'"{value}" is not one of {choices}', key=key)
        return value
    if kind == 'rate_list':
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f'expected a list of rates, got {value!r}', key=key)
        return [parse_quantity(v, 'rate', f'{key}[{i}]') for i, v in enumerate(value)]
    if kind == 'area_map':
        if not isinstance(value, dict):
            raise ConfigError(f'expected a mapping of cross-sections, got {value!r}', key=key)
        parsed = dict()
        for name, v in value.items():
            parsed[name] = parse_quantity(v, 'area', f'{key}.{name}')
            if parsed[name] < 0:
                raise ConfigError(f'cross-section must be non-negative, got {v}', key=f'{key}.{name}')
        return parsed
    if kind == 'mapping':
        if not isinstance(value, dict) or not all(isinstance(v, dict) for v in value.values()):
            raise ConfigError(f'expected a mapping of stage name to parameters, got {value!r}', key=key)
        return copy.deepcopy(value)
    if kind == 'str_list':
        if isinstance(value, str):
            value = [value]
        return [str(v) for v in value]
    if kind == 'observables':
        if isinstance(value, str):
            value = [value]
        for name in value:
            if name not in OBSERVABLES:
                raise ConfigError(f'unknown observable "{name}"', key=key)
        return list(value)
    if kind == 'probes':
        if isinstance(value, (str, int)):
            value = [value]
        probes = list()
        for i, v in enumerate(value):
            if v == 'exit' or isinstance(v, int) and not isinstance(v, bool):
                probes.append(v)
            else:
                probes.append(parse_quantity(v, 'length', f'{key}[{i}]'))
        return probes
    raise RuntimeError(f'unhandled config kind {kind}')


class RunConfig(object):
    '''
        Validated run configuration. Construct from a YAML file with
        ``RunConfig.from_file(path)`` or from a nested ``dict`` with
        ``RunConfig(d)``. Values are converted to canonical units on
        construction; the normalized mapping is available as ``to_dict()``.

        Sections are accessible by item, e.g. ``config['pump']['energy']``.

    '''

    def __init__(self, config=None, source=None):
        self.source = source
        raw = copy.deepcopy(config) if config is not None else dict()
        if not isinstance(raw, dict):
            raise ConfigError(f'config must be a mapping, got {type(raw).__name__}')
        unknown = [section for section in raw if section not in SCHEMA]
        if unknown:
            raise ConfigError(f'unknown section "{unknown[0]}"', key=unknown[0])

        self._data = dict()
        for section, schema in SCHEMA.items():
            entries = raw.get(section) or dict()
            if not isinstance(entries, dict):
                raise ConfigError(f'section must be a mapping', key=section)
            for key in entries:
                if key not in schema:
                    raise ConfigError(f'unknown key', key=f'{section}.{key}')
            self._data[section] = dict()
            for key, (kind, default) in schema.items():
                value = entries.get(key, copy.deepcopy(default))
                self._data[section][key] = _parse_value(kind, value, f'{section}.{key}')
        self.validate()

    @classmethod
    def from_file(cls, path):
        '''
            Load a YAML config file. ``!include`` tags are resolved relative to
            the working directory.

        '''
        if not os.path.exists(path):
            raise ConfigError(f'config file {path} not found')
        YamlIncludeConstructor.add_to_loader_class(loader_class=yaml.FullLoader, base_dir='./')
        with open(path, 'r') as f:
            try:
                config = yaml.load(f, Loader=yaml.FullLoader)
            except yaml.YAMLError as e:
                raise ConfigError(f'could not parse {path}: {e}')
        return cls(config, source=path)

    @classmethod
    def from_yaml(cls, text):
        return cls(yaml.load(text, Loader=yaml.FullLoader))

    def __getitem__(self, section):
        return self._data[section]

    def __repr__(self):
        return f'RunConfig(source={self.source}, mode={self.mode}, hash={self.hash[:12]})'

    def get(self, dotted_key, default=None):
        section, key = dotted_key.split('.', 1)
        return self._data.get(section, dict()).get(key, default)

    def override(self, **overrides):
        '''
            Return a new config with dotted keys replaced, e.g.
            ``config.override(**{'run.trajectories': 10})``. ``None`` values
            are ignored.

        '''
        d = self.to_dict()
        for dotted_key, value in overrides.items():
            if value is None:
                continue
            if '.' not in dotted_key:
                raise ConfigError(f'override key must be "section.key"', key=dotted_key)
            section, key = dotted_key.split('.', 1)
            d.setdefault(section, dict())[key] = value
        return RunConfig(d, source=self.source)

    def validate(self):
        '''
            Check cross-key consistency. Raises ``ConfigError`` naming the
            first offending key.

        '''
        from .physics.grid_domain import largest_prime_factor, MAX_PRIME_FACTOR
        d = self._data
        for key in ('nx', 'ny'):
            if largest_prime_factor(d['grid'][key]) > MAX_PRIME_FACTOR:
                raise ConfigError(f'{d["grid"][key]} has a prime factor above {MAX_PRIME_FACTOR}', key=f'grid.{key}')
        for key in ('width_x', 'width_y', 'window', 'wavelength'):
            if d['grid'][key] <= 0:
                raise ConfigError(f'must be positive, got {d["grid"][key]}', key=f'grid.{key}')
        if d['medium']['length'] <= 0:
            raise ConfigError(f'must be positive, got {d["medium"]["length"]}', key='medium.length')
        if d['medium']['concentration'] < 0:
            raise ConfigError(f'must be non-negative', key='medium.concentration')
        if d['medium']['profile'] == 'gaussian' and not d['medium']['profile_fwhm']:
            raise ConfigError(f'gaussian profile requires profile_fwhm', key='medium.profile_fwhm')
        if d['pump']['energy'] < 0:
            raise ConfigError(f'must be non-negative', key='pump.energy')
        for key in ('photon_energy', 'fwhm_x', 'fwhm_y', 'fwhm_t'):
            if d['pump'][key] <= 0:
                raise ConfigError(f'must be positive, got {d["pump"][key]}', key=f'pump.{key}')
        for key in ('gamma_upper', 'gamma_lower'):
            if d['physics'][key] <= 0:
                raise ConfigError(f'natural width must be positive, got {d["physics"][key]}', key=f'physics.{key}')
        if d['physics']['gamma_rad'] < 0:
            raise ConfigError(f'must be non-negative', key='physics.gamma_rad')
        if d['physics']['detunings'] is not None and len(d['physics']['detunings']) != 6:
            raise ConfigError(f'expected 6 level detunings, got {len(d["physics"]["detunings"])}', key='physics.detunings')
        for key in ('seed_fwhm_x', 'seed_fwhm_y', 'seed_fwhm_t'):
            if d['physics'][key] <= 0:
                raise ConfigError(f'must be positive', key=f'physics.{key}')

        if d['run']['stages'] is not None:
            for stage in d['run']['stages']:
                # custom stages are given by classname
                if stage not in DEFAULT_STAGES and not (stage[:1].isupper() and stage.isidentifier()):
                    raise ConfigError(f'unknown stage "{stage}" (known: {DEFAULT_STAGES} or a classname)', key='run.stages')
        stages = d['run']['stages'] if d['run']['stages'] is not None else DEFAULT_STAGES
        for stage in d['run']['stage_params']:
            if stage not in stages:
                raise ConfigError(f'parameters given for stage "{stage}" which is not run', key='run.stage_params')

        mode = d['run']['mode']
        if d['output']['observables'] is not None and mode == 'pump-only':
            for name in d['output']['observables']:
                if name in FIELD_OBSERVABLES:
                    raise ConfigError(f'observable "{name}" requires emitted fields but mode is pump-only',
                                      key='output.observables')
        nz = d['grid']['nz']
        for probe in d['output']['probes']:
            if isinstance(probe, int) and not 0 <= probe <= nz:
                raise ConfigError(f'probe plane {probe} outside 0..{nz}', key='output.probes')
            if isinstance(probe, float) and not 0 <= probe <= d['medium']['length']:
                raise ConfigError(f'probe depth {probe} nm outside the medium', key='output.probes')
        probe_tau = d['output']['probe_tau']
        if probe_tau is not None:
            start = d['grid']['window_start']
            if not start <= probe_tau < start + d['grid']['window']:
                raise ConfigError(f'probe time {probe_tau} fs outside the simulated window', key='output.probe_tau')

    @property
    def mode(self):
        return self._data['run']['mode']

    @property
    def observables(self):
        ''' Requested observables, defaulting to every one the mode can produce '''
        names = self._data['output']['observables']
        if names is None:
            return list(MEDIUM_OBSERVABLES if self.mode == 'pump-only' else OBSERVABLES)
        return list(names)

    @property
    def stages(self):
        stages = self._data['run']['stages']
        return list(stages) if stages is not None else list(DEFAULT_STAGES)

    @property
    def number_density(self):
        ''' Copper number density in nm^-3 '''
        return self._data['medium']['concentration'] * AVOGADRO_PER_NM3

    def to_dict(self):
        return copy.deepcopy(self._data)

    def to_yaml(self):
        return yaml.dump(self.to_dict(), default_flow_style=False, sort_keys=True)

    @property
    def hash(self):
        '''
            sha256 of the canonical config dump. The output path and the
            trajectory range are excluded so that partial runs of one ensemble
            share a hash.

        '''
        d = self.to_dict()
        del d['output']['path']
        del d['run']['trajectories']
        del d['run']['first_trajectory']
        return hashlib.sha256(yaml.dump(d, default_flow_style=False, sort_keys=True).encode()).hexdigest()

    def grid_spec(self):
        '''
            :returns: ``GridSpec`` for this run

        '''
        from .physics.grid_domain import GridSpec
        g = self._data['grid']
        return GridSpec(
            nx=g['nx'], ny=g['ny'], nz=g['nz'], ntau=g['ntau'],
            dx=g['width_x'] / g['nx'], dy=g['width_y'] / g['ny'],
            dz=self._data['medium']['length'] / g['nz'], dtau=g['window'] / g['ntau'],
            wavelength=g['wavelength'], window_start=g['window_start'])

    def atomic_model(self):
        '''
            :returns: ``(LevelScheme, CrossSectionTable)`` with the physics overrides applied

        '''
        from .physics.atomic_model import build_cu_kalpha1
        p = self._data['physics']
        return build_cu_kalpha1(
            gamma_rad=p['gamma_rad'], gamma_upper=p['gamma_upper'], gamma_lower=p['gamma_lower'],
            energies=p['detunings'], cross_sections=p['cross_sections'] or None,
            cross_section_file=p['cross_section_file'])

    def probe_planes(self):
        '''
            Resolve ``output.probes`` to sorted unique plane indices in ``0..nz``

        '''
        nz = self._data['grid']['nz']
        dz = self._data['medium']['length'] / nz
        planes = set()
        for probe in self._data['output']['probes']:
            if probe == 'exit':
                planes.add(nz)
            elif isinstance(probe, int):
                planes.add(probe)
            else:
                planes.add(int(round(probe / dz)))
        return sorted(planes)


def load_config(path, **overrides):
    '''
        Load and validate a config file, applying dotted-key overrides

        :returns: ``RunConfig``

    '''
    config = RunConfig.from_file(path)
    if any(v is not None for v in overrides.values()):
        config = config.override(**overrides)
    logging.debug(f'loaded {config!r}')
    return config
