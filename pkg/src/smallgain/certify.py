# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging
import math

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .dde import simulate
from .exception import BracketError, DomainError, NumericalError
from .gains import LinearGain, compose_all, feedback_small_gain
from .signals import DEFAULT_TAIL_FRACTION, tail_amplitude
from .stage import StageInterval
from .sweep import DEFAULT_OSC_THRESHOLD

logger = logging.getLogger(__name__)

DEFAULT_U_RANGE = (0.02, 0.2)
DEFAULT_U_GRID = 801
DEFAULT_TOL_K = 0.05
FD_STEP = 1e-5
HINF_RTOL = 1e-6


@dataclass(frozen=True)
class Certificate:
    """
    Small-gain stability certificate of an inhibitory feedback loop closed
    around a cascade of rational stages: for every feedback gain
    ``k < k_max`` and arbitrary delays, all closed-loop solutions converge to a
    unique equilibrium.

    :ivar u_bar: Lower end of the admitted input set ``[u_bar, inf)`` of the
        first stage.
    :ivar mu: External input of the feedback loop.
    :ivar anchors: Lower ends ``x_i`` of the propagated state intervals
        ``[x_i, 1]`` (``x_0 = u_bar``, ``g_i(x_i) = x_{i-1}``).
    :ivar thetas: Minima of ``g_i'`` on ``[x_i, 1]``.
    """

    u_bar: float
    mu: float
    anchors: Tuple[float, ...]
    thetas: Tuple[float, ...]

    @property
    def theta_total(self):
        return math.prod(self.thetas)

    @property
    def lambdas(self):
        return tuple(1 / theta for theta in self.thetas)

    @property
    def lambda_total(self):
        return 1 / self.theta_total

    @property
    def cascade_gain(self):
        return compose_all(LinearGain(lam) for lam in self.lambdas)

    @property
    def k_smallgain(self):
        return self.theta_total / self.mu

    @property
    def k_input(self):
        return self.mu / self.u_bar - 1

    @property
    def k_max(self):
        return min(self.k_smallgain, self.k_input)

    @property
    def nothing_certified(self):
        return self.k_max <= 0

    def certifies(self, k):
        """
        Whether feedback gain ``k`` is covered: the small-gain condition holds
        and the fed back input stays in ``[u_bar, mu]``.
        """
        return 0 <= k < self.k_max and feedback_small_gain(k, self.mu, self.cascade_gain)


def certify(stages, u_bar, mu):
    """
    Compute the stability certificate of the cascade for the input set
    ``[u_bar, inf)``: propagate the anchors ``x_i = g_i^-1(x_{i-1})`` starting
    from ``x_0 = u_bar``, minimize ``g_i'`` on ``[x_i, 1]``, and combine the
    small-gain bound ``theta / mu`` with the input admissibility bound
    ``mu / u_bar - 1``.
    """
    if not u_bar > 0:
        raise DomainError(f'u_bar must be positive, got {u_bar!r}')
    if not mu > 0:
        raise DomainError(f'mu must be positive, got {mu!r}')

    anchors, thetas = [], []
    x = u_bar
    for stage in stages:
        x = stage.g_inverse(x)
        anchors.append(x)
        thetas.append(stage.theta(StageInterval(x, 1.0)))

    cert = Certificate(u_bar=float(u_bar), mu=float(mu), anchors=tuple(anchors), thetas=tuple(thetas))
    logger.debug('Certificate at u_bar=%r: theta=%r, lambda=%r, k_max=%r', u_bar, cert.theta_total, cert.lambda_total, cert.k_max)
    return cert


def certify_grid(stages, mu, u_values):
    """
    Certificates for a sequence of ``u_bar`` values, in the given order.
    """
    return [certify(stages, float(u), mu) for u in u_values]


def optimize_ubar(stages, mu, u_lo=DEFAULT_U_RANGE[0], u_hi=DEFAULT_U_RANGE[1], grid_n=DEFAULT_U_GRID):
    """
    Pick ``u_bar`` from a uniform grid on ``[u_lo, u_hi]`` to maximize the
    certified gain bound. Ties are broken towards smaller ``u_bar``.

    :return: Tuple: (best u_bar, its Certificate).
    """
    if not 0 < u_lo < u_hi:
        raise DomainError(f'invalid u_bar range [{u_lo!r}, {u_hi!r}]')
    if grid_n < 2:
        raise DomainError(f'grid must have at least 2 points, got {grid_n!r}')

    best = best_certificate(certify_grid(stages, mu, np.linspace(u_lo, u_hi, grid_n)))
    logger.info('Best u_bar on [%r, %r]: %r (k_max=%r)', u_lo, u_hi, best.u_bar, best.k_max)
    return best.u_bar, best


def best_certificate(certs):
    """
    Certificate with the largest ``k_max``, the first one on ties.
    """
    best = None
    for cert in certs:
        if best is None or cert.k_max > best.k_max:
            best = cert
    if best is None:
        raise DomainError('no certificate to choose from')
    return best


def global_k_bound(stages, mu):
    """
    Conservative gain bound ``prod(delta_i) / mu`` from the global Lipschitz
    constants ``1 / delta_i`` of the inverse equilibrium maps. It needs no
    restriction of the input set.
    """
    return math.prod(stage.delta_lower_bound() for stage in stages) / mu


def secant_margin(n):
    """
    Loop gain margin ``sec(pi / n) ** n`` of the secant condition.
    """
    if n < 3:
        raise DomainError(f'secant condition needs a loop of at least 3 stages, got {n!r}')
    return (1 / math.cos(math.pi / n)) ** n


def secant_relaxed_bound(cert, n):
    """
    Gain bound of the linearized, delay-free loop: the small-gain term of the
    certificate relaxed by the secant margin, still capped by input
    admissibility. Guarantees local stability only.
    """
    return min(secant_margin(n) * cert.theta_total / cert.mu, cert.k_input)


def secant_hurwitz_check(alphas, betas):
    """
    Secant condition ``|prod(betas) / prod(alphas)| < sec(pi / n) ** n``,
    sufficient for the cyclic matrix of :func:`cyclic_matrix` to be Hurwitz.

    :raises DomainError: If the sequences differ in length, are shorter than
        3, or violate ``alpha_i < 0 < beta_i``.
    """
    alphas, betas = list(alphas), list(betas)
    if len(alphas) != len(betas):
        raise DomainError(f'{len(alphas)} diagonal and {len(betas)} off-diagonal entries')
    if any(not a < 0 for a in alphas) or any(not b > 0 for b in betas):
        raise DomainError(f'secant condition needs negative alphas and positive betas, got {alphas!r} and {betas!r}')
    return abs(math.prod(betas) / math.prod(alphas)) < secant_margin(len(alphas))


def cyclic_matrix(alphas, betas):
    """
    Jacobian of a linearized cyclic loop with inhibitory closing edge:
    ``alphas`` on the diagonal, ``betas[i]`` at ``(i, i - 1)``, and
    ``-betas[0]`` at ``(0, n - 1)``.
    """
    n = len(alphas)
    matrix = np.diag(np.asarray(alphas, dtype=float))
    for i in range(1, n):
        matrix[i, i - 1] = betas[i]
    matrix[0, n - 1] = -betas[0]
    return matrix


def is_hurwitz(matrix):
    return bool(np.all(np.linalg.eigvals(matrix).real < 0))


@dataclass(frozen=True)
class Linearization:
    """
    Linearization ``z' = a z + b v`` of a stage at ``(x_bar, u_bar)``.
    """

    x_bar: float
    u_bar: float
    a: float
    b: float

    @property
    def hinf_gain(self):
        return abs(self.b / self.a)


def linearization(stage, u_bar):
    """
    Finite-difference linearization of a stage at its equilibrium for the
    constant input ``u_bar``.
    """
    if not u_bar > 0:
        raise DomainError(f'u_bar must be positive, got {u_bar!r}')
    x_bar = stage.g_inverse(u_bar)
    h = FD_STEP * min(1.0, x_bar, 1 - x_bar)
    a = (stage.f(x_bar + h, u_bar) - stage.f(x_bar - h, u_bar)) / (2 * h)
    hu = FD_STEP * u_bar
    b = (stage.f(x_bar, u_bar + hu) - stage.f(x_bar, u_bar - hu)) / (2 * hu)
    return Linearization(x_bar=x_bar, u_bar=u_bar, a=a, b=b)


def linearized_hinf_gain(stage, u_bar):
    """
    H-infinity gain ``(g^-1)'(u_bar) = 1 / g'(x_bar)`` of the stage
    linearized at its equilibrium, cross-checked against ``|b / a|`` of the
    finite-difference linearization.

    :raises NumericalError: If the two values disagree beyond HINF_RTOL.
    """
    lin = linearization(stage, u_bar)
    gain = 1 / stage.g_prime(lin.x_bar)
    if not math.isclose(lin.hinf_gain, gain, rel_tol=HINF_RTOL):
        raise NumericalError(f'linearized gain {lin.hinf_gain!r} of {stage} at u={u_bar!r} disagrees with 1/g\'(x) = {gain!r}')
    return gain


def cascade_linearized_gain(stages, u_bar):
    """
    H-infinity gain of the linearized cascade: product of the stage gains
    along the equilibria propagated from ``u_bar``. It equals the
    certificate's ``lambda_total`` whenever every ``theta_i`` is attained at
    its anchor, and is bounded by it otherwise.
    """
    gain = 1.0
    u = u_bar
    for stage in stages:
        gain *= linearized_hinf_gain(stage, u)
        u = stage.g_inverse(u)
    return gain


def bracket_hopf_onset(model, cfg, k_lo, k_hi, *,
                       threshold=DEFAULT_OSC_THRESHOLD, tol_k=DEFAULT_TOL_K, tail_fraction=DEFAULT_TAIL_FRACTION):
    """
    Narrow down the feedback gain where the closed loop starts to oscillate,
    by bisection on the presence of a sustained oscillation of the last
    stage.

    :param model: CascadeModel whose gain ``k`` is ignored.
    :param cfg: SimConfig used for every simulation.
    :param k_lo: Gain with converging simulation.
    :param k_hi: Gain with oscillating simulation.
    :param threshold: Tail amplitude of ``x_n`` that counts as oscillation.
    :param tol_k: Width of the bracket to stop at.
    :param tail_fraction: Tail of the trajectory to analyze.
    :return: Tuple: (k_lo, k_hi) of the final bracket.
    :raises BracketError: If ``k_lo`` oscillates or ``k_hi`` does not. The
        ``result`` attribute holds the two endpoint verdicts.
    """
    if not 0 <= k_lo < k_hi:
        raise DomainError(f'invalid gain bracket [{k_lo!r}, {k_hi!r}]')
    if tol_k >= k_hi - k_lo:
        return k_lo, k_hi

    def oscillates(k):
        states = simulate(model.with_gain(k), cfg)
        amplitude = tail_amplitude(states.column(model.order - 1), tail_fraction)
        logger.info('\tk=%r: tail amplitude %r', k, amplitude)
        return amplitude >= threshold

    lo_osc, hi_osc = oscillates(k_lo), oscillates(k_hi)
    if lo_osc or not hi_osc:
        raise BracketError(f'gains [{k_lo!r}, {k_hi!r}] do not bracket the onset of oscillations', result=(lo_osc, hi_osc))

    while k_hi - k_lo > tol_k:
        k_mid = (k_lo + k_hi) / 2
        if oscillates(k_mid):
            k_hi = k_mid
        else:
            k_lo = k_mid
        logger.info('Onset bracket: [%r, %r]', k_lo, k_hi)
    return k_lo, k_hi


def find_hopf_onset(model, cfg, k_lo, k_hi, *,
                    threshold=DEFAULT_OSC_THRESHOLD, tol_k=DEFAULT_TOL_K, tail_fraction=DEFAULT_TAIL_FRACTION):
    """
    Midpoint of the bracket found by :func:`bracket_hopf_onset`.
    """
    k_lo, k_hi = bracket_hopf_onset(model, cfg, k_lo, k_hi, threshold=threshold, tol_k=tol_k, tail_fraction=tail_fraction)
    return (k_lo + k_hi) / 2
