# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

from enum import Enum


class Outcome(Enum):

    CONVERGED = 'CONVERGED'
    OSCILLATORY = 'OSCILLATORY'
    UNSETTLED = 'UNSETTLED'

    @classmethod
    def classify(cls, amplitude, *, tol, threshold):
        """
        Classify the asymptotic amplitude of a trajectory tail.

        :param amplitude: Tail amplitude of the signal.
        :param tol: Amplitudes below this are considered converged.
        :param threshold: Amplitudes at or above this are considered
            oscillatory.
        :return: CONVERGED, OSCILLATORY, or UNSETTLED (neither).
        """
        if amplitude < tol:
            return cls.CONVERGED
        if amplitude >= threshold:
            return cls.OSCILLATORY
        return cls.UNSETTLED

    def __repr__(self):
        return f'<{self.__class__.__name__}.{self.name}>'
