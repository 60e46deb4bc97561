import logging

from sfxflow.core import SFXResource
from sfxflow.physics import (number_density, effective_gamma, spectral_mask, Propagator, build_pump_initial,
                             pump_wavenumber, seed_pulse)


class SimulationResource(SFXResource):
    '''
        Trajectory-independent inputs of a run, built once from the config:

         - ``grid``: ``GridSpec``
         - ``scheme``, ``table``: ``LevelScheme`` and ``CrossSectionTable``
         - ``n``: number density ``(nz, nx, ny)`` in nm^-3
         - ``gamma``: paraxial radiative rate in fs^-1
         - ``propagator``: emitted-field ``Propagator`` (spectral mask applied)
         - ``pump_propagator``: ``Propagator`` at the pump carrier
         - ``pump``: ``PumpField`` at the entrance plane
         - ``seed``: ``SeedPulse`` or ``None``
         - ``delta``: refractive index offset applied to the emitted field, or ``None``

        Access from a stage with::

            from sfxflow.core import resources

            resources['SimulationResource'].grid

    '''
    class_version = '0.0.0'

    def __init__(self, **params):
        super(SimulationResource, self).__init__(**params)

    def init(self, source_name):
        super(SimulationResource, self).init(source_name)
        config = self.config
        self.grid = config.grid_spec()
        self.scheme, self.table = config.atomic_model()
        medium = config['medium']
        self.n = number_density(self.grid, config.number_density, medium['profile'], medium['profile_fwhm'])
        self.gamma = effective_gamma(self.grid, self.scheme.gamma_rad)

        physics = config['physics']
        mask = spectral_mask(self.grid, physics['mask_fraction']) if physics['spectral_mask'] else None
        self.propagator = Propagator(self.grid, mask=mask)
        self.delta = physics['refraction'] if physics['refraction'] else None

        pump = config['pump']
        self.pump = build_pump_initial(self.grid, pump['energy'], pump['photon_energy'], pump['fwhm_x'],
                                       pump['fwhm_y'], pump['fwhm_t'], pump['delay'])
        self.pump_propagator = Propagator(self.grid, wavenumber=pump_wavenumber(pump['photon_energy']))
        self.seed = seed_pulse(self.grid, amplitude=physics['seed_amplitude'],
                               polarization=physics['seed_polarization'], fwhm_x=physics['seed_fwhm_x'],
                               fwhm_y=physics['seed_fwhm_y'], fwhm_t=physics['seed_fwhm_t'],
                               delay=physics['seed_delay'], seed_file=physics['seed_file'],
                               seed_dataset=physics['seed_dataset'])

        logging.info(f'{self.grid!r}')
        logging.info(f'{self.scheme!r}, gamma={self.gamma:g} fs^-1, {self.pump!r}, seed={self.seed!r}')

    @property
    def mode(self):
        return self.config.mode

    @property
    def emits(self):
        ''' ``True`` if the emitted field is propagated '''
        return self.config.mode != 'pump-only'

    @property
    def stochastic(self):
        ''' ``True`` if noise is drawn '''
        return self.config.mode in ('full', 'spontaneous')

    @property
    def atoms_see_field(self):
        ''' ``False`` in the field-free kinetics of spontaneous and pump-only runs '''
        return self.config.mode in ('full', 'deterministic')
