'''
    Streaming ensemble statistics for trajectory observables.

'''
import numpy as np


class RunningMoments(object):
    '''
        Welford mean and second central moment of an array-valued sample.
        Complex samples keep separate second moments for the real and
        imaginary parts.

    '''

    def __init__(self, shape=(), dtype=float):
        self.count = 0
        self.is_complex = np.issubdtype(np.dtype(dtype), np.complexfloating)
        self.mean = np.zeros(shape, dtype=complex if self.is_complex else float)
        self.m2 = np.zeros(shape, dtype=complex if self.is_complex else float)

    def __repr__(self):
        return f'RunningMoments(count={self.count}, shape={self.mean.shape}, complex={self.is_complex})'

    @staticmethod
    def _square(delta_a, delta_b, is_complex):
        if is_complex:
            return delta_a.real * delta_b.real + 1j * delta_a.imag * delta_b.imag
        return delta_a * delta_b

    def add(self, value):
        value = np.asarray(value)
        if value.shape != self.mean.shape:
            raise ValueError(f'sample shape {value.shape} does not match {self.mean.shape}')
        if np.iscomplexobj(value) and not self.is_complex:
            raise TypeError('complex sample pushed into a real accumulator')
        self.count += 1
        delta = value - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + self._square(delta, value - self.mean, self.is_complex)

    def merge(self, other):
        '''
            Combine with ``other`` in place (pairwise update of count, mean
            and M2)

        '''
        if other.count == 0:
            return self
        if self.mean.shape != other.mean.shape:
            raise ValueError(f'cannot merge shapes {self.mean.shape} and {other.mean.shape}')
        if self.count == 0:
            self.count = other.count
            self.mean = other.mean.copy()
            self.m2 = other.m2.copy()
            self.is_complex = other.is_complex
            return self
        n1, n2 = self.count, other.count
        n = n1 + n2
        delta = other.mean - self.mean
        self.mean = (n1 * self.mean + n2 * other.mean) / n
        self.m2 = self.m2 + other.m2 + self._square(delta, delta, self.is_complex) * n1 * n2 / n
        self.count = n
        return self

    def sem(self):
        '''
            Standard error of the mean ``√(M2/(N(N-1)))``; complex moments
            return ``SEM(Re) + i SEM(Im)``. Zero for fewer than two samples.

        '''
        if self.count < 2:
            return np.zeros_like(self.mean)
        scale = self.count * (self.count - 1)
        if self.is_complex:
            return np.sqrt(np.maximum(self.m2.real, 0) / scale) + 1j * np.sqrt(np.maximum(self.m2.imag, 0) / scale)
        return np.sqrt(np.maximum(self.m2, 0) / scale)

    def copy(self):
        new = RunningMoments(self.mean.shape, self.mean.dtype)
        new.count = self.count
        new.mean = self.mean.copy()
        new.m2 = self.m2.copy()
        return new


class EnsembleAccumulator(object):
    '''
        Named collection of ``RunningMoments`` plus trajectory bookkeeping.

        Observables are registered with their axes and units, then one sample
        per accepted trajectory is added with ``add``. Divergent trajectories
        are only counted (``add_divergent``). Accumulators from different
        workers or files are combined with ``merge``.

    '''

    def __init__(self):
        self.moments = dict()
        self.meta = dict()
        self.n_trajectories = 0
        self.n_divergent = 0

    def __repr__(self):
        return (f'EnsembleAccumulator(n_trajectories={self.n_trajectories}, n_divergent={self.n_divergent}, '
                f'observables={list(self.moments)})')

    def __contains__(self, name):
        return name in self.moments

    @property
    def names(self):
        return list(self.moments)

    def register(self, name, shape, dtype=complex, axes=(), units=''):
        '''
            Declare an observable. Re-registering with the same shape is a no-op.

            :param axes: ``tuple`` of ``str``, one name per array dimension

            :param units: ``str``

        '''
        shape = tuple(shape)
        if name in self.moments:
            if self.moments[name].mean.shape != shape:
                raise ValueError(f'observable {name} already registered with shape {self.moments[name].mean.shape}')
            return
        if axes and len(axes) != len(shape):
            raise ValueError(f'observable {name}: {len(axes)} axes for {len(shape)} dimensions')
        self.moments[name] = RunningMoments(shape, dtype)
        self.meta[name] = dict(axes=tuple(axes), units=units)

    def add(self, name, value):
        if name not in self.moments:
            value = np.asarray(value)
            self.register(name, value.shape, value.dtype)
        self.moments[name].add(value)

    def add_trajectory(self, samples):
        '''
            Add one accepted trajectory

            :param samples: ``dict`` of observable name to sample

        '''
        for name, value in samples.items():
            self.add(name, value)
        self.n_trajectories += 1

    def add_divergent(self):
        self.n_divergent += 1

    def mean(self, name):
        return self.moments[name].mean

    def sem(self, name):
        return self.moments[name].sem()

    def count(self, name):
        return self.moments[name].count

    def merge(self, other):
        '''
            Fold ``other`` into this accumulator in place and return ``self``

        '''
        for name, moments in other.moments.items():
            if name not in self.moments:
                self.moments[name] = moments.copy()
                self.meta[name] = dict(other.meta[name])
            else:
                self.moments[name].merge(moments)
        self.n_trajectories += other.n_trajectories
        self.n_divergent += other.n_divergent
        return self

    @classmethod
    def merged(cls, accumulators):
        ''' New accumulator combining ``accumulators`` in the given order '''
        out = cls()
        for acc in accumulators:
            out.merge(acc)
        return out
