'''
    Counter-based complex Gaussian noise and the diffusion/drift gauges.

    Stream layout: every ``(seed, trajectory)`` pair keys a Philox-4x64
    bit generator. The draw for τ step ``k`` and noise kind ``which``
    (``0 = ξ⁺``, ``1 = ξ⁻``) starts at counter ``[0, 0, which, k]``. Within a
    draw the real parts of all entries come first, then the imaginary parts,
    both in C order of the requested shape, each a
    ``Generator.standard_normal`` variate divided by ``√2``.

'''
import numpy as np

#: ``which`` index of each noise kind in the counter
XI_PLUS = 0
XI_MINUS = 1


class NoiseField(object):
    '''
        One τ step of noise: ``xi_plus`` and ``xi_minus`` with shape
        ``(2, nz, nx, ny)`` (polarization first).

    '''

    def __init__(self, xi_plus, xi_minus, trajectory, step):
        self.xi_plus = xi_plus
        self.xi_minus = xi_minus
        self.trajectory = trajectory
        self.step = step

    def __repr__(self):
        return f'NoiseField(trajectory={self.trajectory}, step={self.step}, shape={self.xi_plus.shape})'

    @classmethod
    def zeros(cls, shape, trajectory=0, step=0):
        return cls(np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex), trajectory, step)


class NoiseStream(object):
    '''
        Per-trajectory noise source. Draws depend only on
        ``(seed, trajectory, step, which)``, never on call order.

        :param seed: ``int``, master seed (unsigned 64 bit)

        :param trajectory: ``int``, trajectory id (unsigned 64 bit)

    '''

    def __init__(self, seed, trajectory):
        if not 0 <= int(seed) < 2**64 or not 0 <= int(trajectory) < 2**64:
            raise ValueError(f'seed and trajectory must be unsigned 64-bit integers, got {seed}, {trajectory}')
        self.seed = int(seed)
        self.trajectory = int(trajectory)
        self._key = np.array([self.seed, self.trajectory], dtype=np.uint64)

    def __repr__(self):
        return f'NoiseStream(seed={self.seed}, trajectory={self.trajectory})'

    def generator(self, step, which):
        counter = np.array([0, 0, which, step], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self._key, counter=counter))

    def complex_normal(self, step, which, shape):
        '''
            Standard complex Gaussians, ``E|ξ|² = 1``, ``E ξ² = 0``

        '''
        rng = self.generator(step, which)
        parts = rng.standard_normal(size=(2,) + tuple(shape))
        return (parts[0] + 1j * parts[1]) / np.sqrt(2)


def sample_noise(stream, shape, step):
    '''
        Draw ``ξ⁺`` and ``ξ⁻`` for one τ step. Scaling by grid steps is applied
        at the point of use.

        :param stream: ``NoiseStream``

        :param shape: ``tuple``, e.g. ``(2, nz, nx, ny)``

        :param step: ``int``, τ index

        :returns: ``NoiseField``

    '''
    return NoiseField(stream.complex_normal(step, XI_PLUS, shape),
                      stream.complex_normal(step, XI_MINUS, shape),
                      stream.trajectory, step)


def diffusion_gauge(rho_up, rho_low, eps_g=1e-8):
    '''
        ``g = ρ_up/(ρ_up - ρ_low)`` where ``|Re(ρ_up - ρ_low)| > eps_g``, else
        the neutral gauge ``g = 1``

    '''
    diff = rho_up - rho_low
    ok = np.abs(np.real(diff)) > eps_g
    safe = np.where(ok, diff, 1)
    return np.where(ok, rho_up / safe, 1).astype(complex)


def drift_gauge_mask(rho_up, rho_low):
    ''' ``True`` where ``Re ρ_up > Re ρ_low`` '''
    return np.real(rho_up) > np.real(rho_low)


def gauge_scales(g, gamma, dtau):
    '''
        Noise amplitudes for the field sources and the atomic increments::

            field = √(γ g / 2Δτ)
            atom  = √(γ g⁻¹ / 2Δτ)

        Both use the same complex ``√g`` so ``field * atom = γ/(2Δτ)``.

        :returns: ``(field, atom)``

    '''
    base = np.sqrt(gamma / (2 * dtau))
    sqrt_g = np.sqrt(np.asarray(g, dtype=complex))
    return base * sqrt_g, base / sqrt_g
