# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging
import math

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from scipy.spatial.distance import cdist

from .exception import DegenerateInputError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_TAIL_FRACTION = 0.2
MAX_PAIRWISE_SAMPLES = 10_000
_PAIRWISE_CHUNK = 1024


class SampledSignal:
    """
    Uniformly sampled, vector-valued time signal. The value at index ``j``
    belongs to time ``t0 + j * dt``. Instances are immutable: the sample array
    is copied at construction and flagged read-only.
    """

    def __init__(self, values, *, dt, t0=0.0):
        """
        :param values: Sequence of samples. Scalar samples are promoted to
            vectors of dimension 1.
        :param dt: Time step (must be positive).
        :param t0: Time of the first sample (must be nonnegative).
        :raises DegenerateInputError: If the signal is empty, has a
            non-positive step, or contains non-finite samples.
        """
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, np.newaxis]
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise DegenerateInputError(f'signal must be a nonempty sequence of vectors, got shape {values.shape}')
        if not (math.isfinite(dt) and dt > 0):
            raise DegenerateInputError(f'invalid time step: {dt!r}')
        if not (math.isfinite(t0) and t0 >= 0):
            raise DegenerateInputError(f'invalid start time: {t0!r}')
        if not np.all(np.isfinite(values)):
            raise DegenerateInputError('signal contains non-finite samples')

        values.flags.writeable = False
        self._values = values
        self._dt = float(dt)
        self._t0 = float(t0)

    @classmethod
    def from_function(cls, fn, *, dt, t_end, t0=0.0):
        """
        Sample a vectorized function of time on the grid ``t0, t0 + dt, ...``
        up to (and including, up to rounding) ``t_end``.
        """
        count = int(round((t_end - t0) / dt)) + 1
        return cls(fn(t0 + np.arange(count) * dt), dt=dt, t0=t0)

    @property
    def values(self):
        return self._values

    @property
    def dt(self):
        return self._dt

    @property
    def t0(self):
        return self._t0

    @property
    def dim(self):
        return self._values.shape[1]

    @property
    def span(self):
        return (len(self) - 1) * self._dt

    @property
    def times(self):
        return self._t0 + np.arange(len(self)) * self._dt

    def __len__(self):
        return self._values.shape[0]

    def column(self, i):
        """
        :param i: Index of a component.
        :return: The scalar signal of the ``i``-th component.
        """
        return SampledSignal(self._values[:, i], dt=self._dt, t0=self._t0)

    def tail_start_index(self, tail_fraction=DEFAULT_TAIL_FRACTION):
        """
        Index of the first sample at or after ``t0 + (1 - tail_fraction) *
        span``.
        """
        if not 0 < tail_fraction <= 1:
            raise DomainError(f'tail fraction must be in (0, 1], got {tail_fraction!r}')
        # The epsilon absorbs rounding of (1 - f) * (N - 1) onto a grid index.
        return max(0, math.ceil((1 - tail_fraction) * (len(self) - 1) - 1e-9))

    def tail(self, tail_fraction=DEFAULT_TAIL_FRACTION):
        return self._values[self.tail_start_index(tail_fraction):]

    def __repr__(self):
        return f'{self.__class__.__name__}(len={len(self)}, dim={self.dim}, dt={self._dt!r}, t0={self._t0!r})'


@dataclass(frozen=True)
class AmplitudeEstimate:
    """
    Asymptotic amplitude of a signal together with its limit, if the signal
    is considered convergent.
    """

    amplitude: float
    tail_start: float
    tol: float
    limit: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise DomainError(f'amplitude must be nonnegative, got {self.amplitude!r}')
        if self.limit is not None and not self.amplitude < self.tol:
            raise DomainError(f'limit reported for amplitude {self.amplitude!r} >= tolerance {self.tol!r}')

    @property
    def converged(self):
        return self.limit is not None


def _diameter(points):
    """
    Largest pairwise Euclidean distance of a point cloud. Clouds larger than
    MAX_PAIRWISE_SAMPLES are thinned uniformly first; the rows holding the
    minimum and maximum of every coordinate always stay in the thinned set.
    """
    if len(points) > MAX_PAIRWISE_SAMPLES:
        stride = math.ceil(len(points) / MAX_PAIRWISE_SAMPLES)
        extremes = np.concatenate([points.argmin(axis=0), points.argmax(axis=0)])
        points = points[np.union1d(np.arange(0, len(points), stride), extremes)]
    diameter = 0.0
    for start in range(0, len(points), _PAIRWISE_CHUNK):
        diameter = max(diameter, float(cdist(points[start:start + _PAIRWISE_CHUNK], points).max()))
    return diameter


def tail_amplitude(sig, tail_fraction=DEFAULT_TAIL_FRACTION):
    """
    Estimate the asymptotic amplitude of a signal as the diameter of its tail
    sample set.

    :param sig: The signal to analyze.
    :param tail_fraction: Trailing fraction of the time span to consider.
    :return: The largest distance between two tail samples.
    :raises DegenerateInputError: If the tail contains fewer than 2 samples.
    """
    tail = sig.tail(tail_fraction)
    if len(tail) < 2:
        raise DegenerateInputError(f'tail of {sig!r} with fraction {tail_fraction!r} has fewer than 2 samples')

    if tail.shape[1] == 1:
        return float(tail.max() - tail.min())
    return _diameter(tail)


def estimate_limit(sig, tail_fraction=DEFAULT_TAIL_FRACTION, tol=1e-6):
    """
    Estimate the asymptotic amplitude and, if it is below ``tol``, the limit
    of a signal (as the mean of its tail samples).
    """
    if not tol > 0:
        raise DomainError(f'tolerance must be positive, got {tol!r}')

    amplitude = tail_amplitude(sig, tail_fraction)
    start = sig.tail_start_index(tail_fraction)
    limit = tuple(float(v) for v in sig.values[start:].mean(axis=0)) if amplitude < tol else None
    return AmplitudeEstimate(amplitude=amplitude, tail_start=sig.t0 + start * sig.dt, tol=tol, limit=limit)


def is_oscillatory(sig, tail_fraction=DEFAULT_TAIL_FRACTION, threshold=0.01):
    """
    Decide whether the tail of a signal keeps oscillating with at least the
    given amplitude.
    """
    if not threshold > 0:
        raise DomainError(f'threshold must be positive, got {threshold!r}')
    return tail_amplitude(sig, tail_fraction) >= threshold
