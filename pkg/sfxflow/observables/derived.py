'''
    Ensemble-level post-processing of accumulated observables. Every entry
    is recomputed from the merged means, so merged files and single runs
    give identical derived arrays.

'''
import logging

import numpy as np

from .estimators import transform_limited_spectrum, polarization_correlation, correlation_width
from ..physics import spontaneous_oracle


class Derived(object):
    '''
        One derived array with its file metadata

    '''

    def __init__(self, name, data, axes=(), units='', **attrs):
        self.name = name
        self.data = np.asarray(data)
        self.axes = tuple(axes)
        self.units = units
        self.attrs = attrs

    def __repr__(self):
        return f'Derived({self.name}, shape={self.data.shape}, units={self.units})'


def emission_spectrum(J_mean, dtau, gamma_dec):
    '''
        Spectrum per polarization from the ensemble two-time correlation at
        the exit probe

        :param J_mean: ``array`` shape ``(2, ntau, ntau)``

        :returns: ``list`` of ``Derived``

    '''
    results = [spontaneous_oracle.analytic_spectrum(J_mean[s], dtau, gamma_dec=gamma_dec) for s in range(2)]
    hwhm = np.array([r['hwhm'] for r in results])
    hwhm_direct = np.array([r['hwhm_direct'] for r in results])
    logging.info(f'emission spectrum HWHM {hwhm} fs^-1 (expected {gamma_dec:g})')
    return [
        Derived('spectrum', np.stack([r['spectrum'] for r in results]), axes=('polarization', 'omega'),
                units='photons', hwhm=hwhm, hwhm_direct=hwhm_direct, gamma_dec=gamma_dec,
                residual=np.array([r['residual'] for r in results])),
        Derived('spectrum_omega', results[0]['omega'], axes=('omega',), units='fs^-1'),
        Derived('spectrum_lorentzian', np.stack([r['lorentzian'] for r in results]),
                axes=('polarization', 'omega'), units='photons'),
    ]


def ensemble_derived(accumulator, grid, gamma_dec, requested=None):
    '''
        Derived arrays available from ``accumulator``

        :param accumulator: merged ``EnsembleAccumulator``

        :param grid: ``GridSpec``

        :param gamma_dec: ``float``, coherence decay rate for the spectrum diagnostics

        :param requested: ``list`` of observable names, or ``None`` for everything available

        :returns: ``list`` of ``Derived``

    '''
    def wanted(name):
        return requested is None or name in requested

    out = list()
    if 'correlation_J' in accumulator and accumulator.count('correlation_J'):
        J = accumulator.mean('correlation_J')
        out.extend(emission_spectrum(J[-1], grid.dtau, gamma_dec))

    if wanted('transform_limited') and 'photon_rate_vs_z' in accumulator:
        rate = accumulator.mean('photon_rate_vs_z')[:, -1]
        spectra, n_clamped = list(), 0
        for s in range(2):
            I_TL, omega, n = transform_limited_spectrum(rate[s], grid.dtau)
            spectra.append(I_TL)
            n_clamped += n
        out.append(Derived('transform_limited', np.stack(spectra), axes=('polarization', 'omega'),
                           units='photons fs', n_clamped=n_clamped))
        out.append(Derived('transform_limited_omega', omega, axes=('omega',), units='fs^-1'))

    if wanted('polarization_correlation') and 'polarization_correlation' in accumulator and 'stokes' in accumulator:
        products = accumulator.mean('polarization_correlation')
        # shifts are centred on zero
        shifts_x = np.arange(products.shape[-4]) - products.shape[-4] // 2
        shifts_y = np.arange(products.shape[-3]) - products.shape[-3] // 2
        C = polarization_correlation(products, accumulator.mean('stokes')[0], shifts_x, shifts_y)
        out.append(Derived('polarization_correlation', np.real(C), axes=('probe', 'dx', 'dy'), units='',
                           shifts_x=shifts_x, shifts_y=shifts_y))

    if 'transverse_correlation' in accumulator:
        gamma = accumulator.mean('transverse_correlation')
        widths = np.array([[correlation_width(gamma[p, s], grid.dx) for s in range(2)]
                           for p in range(gamma.shape[0])])
        out.append(Derived('transverse_correlation_width', widths, axes=('probe', 'polarization'), units='nm'))
    return out
