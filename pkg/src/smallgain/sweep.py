# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from os import cpu_count
from typing import Optional, Tuple

import numpy as np

from .dde import SimConfig, simulate
from .exception import DomainError
from .outcome import Outcome
from .signals import DEFAULT_TAIL_FRACTION, estimate_limit

logger = logging.getLogger(__name__)

DEFAULT_CONVERGENCE_TOL = 1e-4
DEFAULT_OSC_THRESHOLD = 0.01
CHECK_GAIN_FACTOR = 0.95
CHECK_INITIAL_STATES = 3


@dataclass(frozen=True)
class RunSummary:
    """
    Asymptotic behaviour of one simulated trajectory.

    :ivar amplitudes: Tail amplitude of every state component.
    :ivar limit: Tail mean of the state if every component converged.
    :ivar outcome: Classification of the largest component amplitude.
    """

    k: float
    delays: Tuple[float, ...]
    x0: Tuple[float, ...]
    amplitudes: Tuple[float, ...]
    limit: Optional[Tuple[float, ...]]
    outcome: Outcome

    @classmethod
    def from_states(cls, model, cfg, states, *, tail_fraction=DEFAULT_TAIL_FRACTION,
                    tol=DEFAULT_CONVERGENCE_TOL, threshold=DEFAULT_OSC_THRESHOLD):
        estimates = [estimate_limit(states.column(i), tail_fraction, tol) for i in range(states.dim)]
        amplitudes = tuple(est.amplitude for est in estimates)
        limit = tuple(est.limit[0] for est in estimates) if all(est.converged for est in estimates) else None
        return cls(k=model.k, delays=model.all_delays, x0=cfg.x0, amplitudes=amplitudes, limit=limit,
                   outcome=Outcome.classify(max(amplitudes), tol=tol, threshold=threshold))

    @property
    def converged(self):
        return self.outcome is Outcome.CONVERGED


def run_case(case, *, tail_fraction=DEFAULT_TAIL_FRACTION, tol=DEFAULT_CONVERGENCE_TOL, threshold=DEFAULT_OSC_THRESHOLD):
    """
    Simulate a ``(model, cfg)`` pair and summarize its tail.
    """
    model, cfg = case
    states = simulate(model, cfg)
    return RunSummary.from_states(model, cfg, states, tail_fraction=tail_fraction, tol=tol, threshold=threshold)


class Sweep:
    """
    Single process evaluation of a batch of simulations.
    """

    def __init__(self, *, tail_fraction=DEFAULT_TAIL_FRACTION, tol=DEFAULT_CONVERGENCE_TOL, threshold=DEFAULT_OSC_THRESHOLD):
        """
        :param tail_fraction: Trailing fraction of each trajectory to analyze.
        :param tol: Tail amplitude below which a run is considered converged.
        :param threshold: Tail amplitude from which a run is considered
            oscillatory.
        """
        self._run = partial(run_case, tail_fraction=tail_fraction, tol=tol, threshold=threshold)

    def __call__(self, cases):
        """
        :param cases: Iterable of ``(model, cfg)`` pairs.
        :return: List of RunSummary objects in the order of ``cases``.
        """
        cases = list(cases)
        logger.info('Sweep of %d runs starts', len(cases))
        summaries = self._evaluate(cases)
        for summary in summaries:
            logger.debug('\tk=%r, delays=%r, x0=%r: %s', summary.k, summary.delays, summary.x0, summary.outcome.name)
        return summaries

    def _evaluate(self, cases):
        return [self._run(case) for case in cases]


class ParallelSweep(Sweep):

    def __init__(self, *, tail_fraction=DEFAULT_TAIL_FRACTION, tol=DEFAULT_CONVERGENCE_TOL, threshold=DEFAULT_OSC_THRESHOLD,
                 proc_num=None):
        """
        :param proc_num: The level of parallelization.
        """
        super().__init__(tail_fraction=tail_fraction, tol=tol, threshold=threshold)
        self._proc_num = proc_num or cpu_count()

    def _evaluate(self, cases):
        """
        Run the simulations in worker processes. ``map`` keeps the order of
        the cases, so the result is independent of scheduling.
        """
        with ProcessPoolExecutor(self._proc_num) as pool:
            return list(pool.map(self._run, cases))


def gain_cases(model, cfg, ks):
    """
    ``(model, cfg)`` pairs of a gain sweep, in ascending order of gains.
    """
    return [(model.with_gain(float(k)), cfg) for k in sorted(ks)]


def check_delays(n):
    """
    Delay vectors of the certificate cross-check for a cascade of ``n``
    stages, as ``(inter-stage delays, feedback delay)`` pairs.
    """
    return [((0.0,) * (n - 1), 0.0),
            (tuple(float(i) for i in range(1, n)), float(n)),
            ((0.5,) * (n - 1), 5.0)]


@dataclass(frozen=True)
class CrossCheck:
    """
    Outcome of simulating a certified loop from several initial states and
    with several delay vectors.
    """

    k: float
    runs: Tuple[RunSummary, ...]
    spread: Optional[float]
    tol: float

    @property
    def passed(self):
        return self.spread is not None and self.spread < self.tol


def cross_validate(cert, model, cfg, *, seed=0, sweep=None, tol=DEFAULT_CONVERGENCE_TOL):
    """
    Try to falsify a certificate: simulate the loop at ``0.95 * k_max`` from
    random initial states with every delay vector of :func:`check_delays`, and
    require all runs to converge to one common limit.

    :param cert: Certificate to check.
    :param model: CascadeModel providing stages and ``mu`` (its gain and
        delays are overridden).
    :param cfg: SimConfig providing the solver settings (its initial state is
        overridden; the history equals the initial state).
    :param seed: Seed of the random initial states.
    :param sweep: Sweep instance to run the simulations with.
    :param tol: Bound on tail amplitudes and on the spread of the limits.
    """
    if cert.nothing_certified:
        raise DomainError(f'certificate at u_bar={cert.u_bar!r} certifies no positive gain')

    k = CHECK_GAIN_FACTOR * cert.k_max
    rng = np.random.default_rng(seed)
    initial_states = [tuple(float(v) for v in rng.uniform(0, 1, model.order)) for _ in range(CHECK_INITIAL_STATES)]
    cases = [(model.with_gain(k).with_delays(delays, feedback_delay),
              SimConfig(x0=x0, dt=cfg.dt, horizon=cfg.horizon))
             for delays, feedback_delay in check_delays(model.order)
             for x0 in initial_states]

    runs = tuple((sweep or Sweep(tol=tol))(cases))
    if all(run.limit is not None for run in runs):
        limits = np.array([run.limit for run in runs])
        spread = float((limits.max(axis=0) - limits.min(axis=0)).max())
    else:
        spread = None

    logger.info('Cross-check at k=%r: spread of limits %r', k, spread)
    return CrossCheck(k=k, runs=runs, spread=spread, tol=tol)
