# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging
import math

from dataclasses import dataclass

import numpy as np

from .exception import DomainError, NumericalError, SingularityError

logger = logging.getLogger(__name__)

EPS_SING = 1e-9  #: Width of the excluded neighbourhood of the singular end x = 1.
THETA_GRID = 4096
THETA_XTOL = 1e-10
BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
SIGN_DEADBAND = 1e-9

_INV_PHI = (math.sqrt(5) - 1) / 2
_INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


def _result(value):
    return float(value) if np.ndim(value) == 0 else value


def _golden_section(fn, a, b, tol):
    """
    Golden-section search for a minimizer of ``fn`` on ``[a, b]``, assuming a
    single local minimum there.

    :return: The midpoint of the final bracket, of width at most ``tol``.
    """
    h = b - a
    if h <= tol:
        return (a + b) / 2

    steps = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI_SQUARE * h
    d = a + _INV_PHI * h
    yc = fn(c)
    yd = fn(d)
    for _ in range(steps - 1):
        h *= _INV_PHI
        if yc < yd:
            b, d, yd = d, c, yc
            c = a + _INV_PHI_SQUARE * h
            yc = fn(c)
        else:
            a, c, yc = c, d, yd
            d = a + _INV_PHI * h
            yd = fn(d)

    return (a + d) / 2 if yc < yd else (c + b) / 2


@dataclass(frozen=True)
class StageInterval:
    """
    Closed interval ``[lo, hi]`` of nonnegative reals. ``hi`` may only be
    infinite for the external input set ``[u_bar, inf)`` of the first stage.
    """

    lo: float
    hi: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo < 0 or self.lo > self.hi or math.isinf(self.lo):
            raise DomainError(f'invalid stage interval [{self.lo!r}, {self.hi!r}]')

    @property
    def width(self):
        return self.hi - self.lo

    def __contains__(self, x):
        return self.lo <= x <= self.hi

    def issubset(self, other):
        return other.lo <= self.lo and self.hi <= other.hi

    def __str__(self):
        return f'[{self.lo!r}, {self.hi!r}]'


@dataclass(frozen=True)
class RationalStage:
    """
    Scalar monotone subsystem ``x' = -alpha(x) + u * beta(x)`` on the state
    interval [0, 1], with

        alpha(x) = b * x / (c + x)
        beta(x) = d * (1 - x) / (e + 1 - x)

    The input-dependent equilibrium of the stage is ``x = g^-1(u)``, where
    ``g = alpha / beta``.
    """

    b: float
    c: float
    d: float
    e: float

    def __post_init__(self):
        for name in ('b', 'c', 'd', 'e'):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f'stage parameter {name} must be a positive number, got {value!r}')

        grid = np.linspace(0, 1, 65)
        if self.alpha(0.0) != 0 or self.beta(1.0) != 0 \
                or not np.all(np.diff(self.alpha(grid)) > 0) or not np.all(np.diff(self.beta(grid)) < 0):
            raise DomainError(f'{self} is not monotone on [0, 1]')

    @staticmethod
    def _check_state(x, *, singular=False):
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)) or np.any(x < 0) or np.any(x > 1):
            raise DomainError(f'state outside [0, 1]: {x!r}')
        if singular and np.any(x > 1 - EPS_SING):
            raise SingularityError(f'state too close to the singular end x = 1: {x!r}')
        return x

    def alpha(self, x):
        return _result(self.b * x / (self.c + x))

    def beta(self, x):
        return _result(self.d * (1 - x) / (self.e + 1 - x))

    def f(self, x, u):
        """
        Right-hand side ``-alpha(x) + u * beta(x)`` of the stage dynamics.

        :raises DomainError: If ``x`` is outside [0, 1].
        """
        x = self._check_state(x)
        return _result(-self.alpha(x) + u * self.beta(x))

    def g(self, x):
        """
        Equilibrium input ``alpha(x) / beta(x)``, i.e., the unique ``u`` with
        ``f(x, u) = 0``.

        :raises SingularityError: If ``x`` is beyond ``1 - EPS_SING``.
        """
        x = self._check_state(x, singular=True)
        return _result(self.b * x * (self.e + 1 - x) / (self.d * (self.c + x) * (1 - x)))

    def g_prime(self, x):
        """
        Closed-form derivative of :meth:`g`.

        :raises SingularityError: If ``x`` is beyond ``1 - EPS_SING``.
        """
        x = self._check_state(x, singular=True)
        b, c, d, e = self.b, self.c, self.d, self.e
        return _result((b / d) * (e * x ** 2 + c * (x - 1) ** 2 + c * e) / ((c + x) ** 2 * (1 - x) ** 2))

    def g_inverse(self, u, tol=BISECT_TOL):
        """
        Invert :meth:`g` by bisection on ``[0, 1 - EPS_SING]``.

        :param u: Nonnegative input value.
        :param tol: Relative residual tolerance: the result ``x`` satisfies
            ``|g(x) - u| <= tol * max(1, u)``, unless the bracket collapses to
            neighbouring floats first (then the better endpoint is returned).
        :raises NumericalError: If ``u`` exceeds ``g(1 - EPS_SING)`` or the
            bisection does not terminate within BISECT_MAX_ITER steps.
        """
        if not u >= 0:
            raise DomainError(f'input must be nonnegative, got {u!r}')
        if u == 0:
            return 0.0

        lo, hi = 0.0, 1 - EPS_SING
        if self.g(hi) < u:
            raise NumericalError(f'input {u!r} is beyond the range of g on [0, 1 - {EPS_SING}] for {self}')

        bound = tol * max(1.0, u)
        for _ in range(BISECT_MAX_ITER):
            mid = (lo + hi) / 2
            if mid <= lo or mid >= hi:
                break
            residual = self.g(mid) - u
            if abs(residual) <= bound:
                return mid
            if residual < 0:
                lo = mid
            else:
                hi = mid
        else:
            raise NumericalError(f'bisection for g^-1({u!r}) did not converge for {self}')

        return lo if abs(self.g(lo) - u) <= abs(self.g(hi) - u) else hi

    def delta_lower_bound(self):
        """
        Closed-form global lower bound of :meth:`g_prime` on [0, 1).
        """
        b, c, d, e = self.b, self.c, self.d, self.e
        return 16 * (b / d) * c * e / (c + 1) ** 4 * (1 + 1 / (e + c))

    def theta(self, interval, *, grid_n=THETA_GRID, xtol=THETA_XTOL):
        """
        Minimum of :meth:`g_prime` on an interval: a dense grid scan followed by
        golden-section refinement around the grid argmin and its neighbours.
        The part of the interval within EPS_SING of 1 is ignored.

        :param interval: StageInterval within [0, 1].
        :return: The (positive) minimum.
        :raises DomainError: If the interval is not within [0, 1] or nothing
            of it remains after cutting off the singular end.
        """
        lo, hi = interval.lo, min(interval.hi, 1 - EPS_SING)
        if interval.hi > 1 or lo > hi:
            raise DomainError(f'no admissible point for theta in {interval}')
        if lo == hi:
            return self.g_prime(lo)

        xs = np.linspace(lo, hi, grid_n)
        ys = self.g_prime(xs)
        j = int(np.argmin(ys))
        x_min = _golden_section(self.g_prime, xs[max(j - 1, 0)], xs[min(j + 1, grid_n - 1)], xtol)
        theta = min(float(ys[j]), self.g_prime(x_min))
        logger.debug('theta of %s on %s: grid argmin %r, refined argmin %r, value %r', self, interval, xs[j], x_min, theta)
        return theta

    def lipschitz_constant(self, interval):
        """
        Lipschitz constant of the restriction of g^-1 to ``g(interval)``.
        """
        return 1 / self.theta(interval)

    def global_lipschitz_constant(self):
        """
        Lipschitz constant of g^-1 on all nonnegative inputs.
        """
        return 1 / self.delta_lower_bound()

    def propagate_interval(self, interval, tol=BISECT_TOL):
        """
        Image ``g^-1(U)`` of an input interval: the set the stage state is
        attracted to when its input converges into ``U``. An unbounded ``U``
        maps to the state ceiling 1.
        """
        hi = 1.0 if math.isinf(interval.hi) else self.g_inverse(interval.hi, tol)
        return StageInterval(self.g_inverse(interval.lo, tol), hi)

    def check_sign_conditions(self, grid_n, u_samples, tol=SIGN_DEADBAND):
        """
        Check that ``f(x, u) > 0`` below and ``f(x, u) < 0`` above the
        equilibrium ``g^-1(u)`` on a grid of states, for every sampled input.
        Grid points within ``tol`` of the equilibrium are not checked.
        """
        if grid_n < 2:
            raise DomainError(f'grid must have at least 2 points, got {grid_n!r}')
        u_samples = list(u_samples)
        if not u_samples or any(not u >= 0 for u in u_samples):
            raise DomainError('input samples must be a nonempty sequence of nonnegative numbers')

        xs = np.linspace(0, 1, grid_n)
        for u in u_samples:
            x_eq = self.g_inverse(u)
            fs = self.f(xs, u)
            below = xs < x_eq - tol
            above = xs > x_eq + tol
            if not np.all(fs[below] > 0) or not np.all(fs[above] < 0):
                logger.debug('sign conditions of %s violated at input %r', self, u)
                return False
        return True

    def __str__(self):
        return f'RationalStage(b={self.b!r}, c={self.c!r}, d={self.d!r}, e={self.e!r})'


def mapk_stages():
    """
    The three stages of the MAPK cascade with coefficients
    ``b1 = c1 = e1 = b2 = 0.1``, ``c2 = e2 = c3 = e3 = 0.01``, ``b3 = 0.5``,
    ``d1 = d2 = d3 = 1``.
    """
    return (RationalStage(b=0.1, c=0.1, d=1.0, e=0.1),
            RationalStage(b=0.1, c=0.01, d=1.0, e=0.01),
            RationalStage(b=0.5, c=0.01, d=1.0, e=0.01))
