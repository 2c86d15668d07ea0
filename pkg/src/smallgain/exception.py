# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.


class AnalysisException(Exception):
    """
    Base class of analysis-related exceptions. In addition to signal the
    premature termination of an analysis, exception instances may contain the
    intermediate result computed so far.

    :ivar result: A partial result (e.g., the trajectory simulated up to the
        failure), or None if nothing meaningful is available.
    """

    def __init__(self, *args, result=None):
        super().__init__(*args)
        self.result = result


class DomainError(AnalysisException, ValueError):
    """
    Exception to signal that an argument is outside the mathematical domain of
    an operation.
    """


class SingularityError(DomainError):
    """
    Exception to signal an evaluation too close to the singular end x = 1 of a
    stage.
    """


class DegenerateInputError(DomainError):
    """
    Exception to signal a signal that cannot be analyzed, e.g., because its
    tail holds fewer than two samples.
    """


class NumericalError(AnalysisException):
    """
    Exception to signal that a numerical procedure failed, e.g., a bisection
    did not converge or a simulated state blew up.
    """


class ConfigurationError(AnalysisException, ValueError):
    """
    Exception to signal an invalid model, solver or run configuration.
    """


class BracketError(AnalysisException):
    """
    Exception to signal that the endpoints of a gain bracket do not straddle
    the onset of oscillations.
    """
