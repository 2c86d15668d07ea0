# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import math

from dataclasses import dataclass
from functools import reduce

from .exception import DomainError


@dataclass(frozen=True)
class LinearGain:
    """
    Class-K-infinity gain of the form ``r -> slope * r``. Linear gains serve
    both as Cauchy gains and as incremental limit gains of the monotone stages
    handled by this package. A zero slope is admitted for stages whose output
    is certified to be constant.
    """

    slope: float

    def __post_init__(self):
        if not (math.isfinite(self.slope) and self.slope >= 0):
            raise DomainError(f'gain slope must be a finite nonnegative number, got {self.slope!r}')

    def __call__(self, r):
        return self.slope * r

    @property
    def is_class_k_infinity(self):
        return self.slope > 0

    def __str__(self):
        return f'{self.slope!r}*I'


IDENTITY = LinearGain(1.0)  #: Gain of pure delays.


def compose(outer, inner):
    """
    Gain of the cascade ``outer o inner``.
    """
    return LinearGain(outer.slope * inner.slope)


def compose_all(gains):
    """
    Gain of a cascade, given the gains of its blocks in signal-flow order.
    Delay blocks contribute IDENTITY.
    """
    return reduce(lambda acc, gain: compose(gain, acc), gains, IDENTITY)


def memoryless_gain(k, mu):
    """
    Gain of the static inhibitory feedback ``x -> mu / (1 + k * x)``, whose
    Lipschitz constant on the nonnegative reals is ``k * mu``.
    """
    return LinearGain(k * mu)


def small_gain_holds(g1, g2):
    """
    Small-gain condition ``g1(g2(r)) < r`` for every ``r > 0``.
    """
    return g1.slope * g2.slope < 1


def incremental_small_gain_holds(k1, k2):
    """
    Small-gain condition on incremental limit gains. For linear gains it is
    the very same predicate as the one on Cauchy gains.
    """
    return small_gain_holds(k1, k2)


def feedback_small_gain(k, mu, cascade_gain):
    """
    Small-gain condition of a cascade closed by the inhibitory feedback of
    gain ``k`` and external input ``mu``.
    """
    return small_gain_holds(memoryless_gain(k, mu), cascade_gain)
