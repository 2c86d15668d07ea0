# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging
import math

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .exception import ConfigurationError, DomainError, NumericalError
from .signals import SampledSignal
from .stage import RationalStage, mapk_stages

logger = logging.getLogger(__name__)

DEFAULT_DT = 0.01
DEFAULT_HORIZON = 2000.0
CLAMP_WARNING = 1e-6


@dataclass(frozen=True)
class CascadeModel:
    """
    Closed loop of ``n`` rational stages. Stage ``i > 1`` is driven by the
    state of stage ``i - 1`` delayed by ``delays[i - 2]``; the first stage is
    driven by ``mu / (1 + k * x_n)`` with ``x_n`` delayed by
    ``feedback_delay``.
    """

    stages: Tuple[RationalStage, ...]
    delays: Tuple[float, ...] = ()
    feedback_delay: float = 0.0
    mu: float = 0.3
    k: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'stages', tuple(self.stages))
        object.__setattr__(self, 'delays', tuple(float(tau) for tau in self.delays))
        if not self.stages:
            raise ConfigurationError('cascade must have at least one stage')
        if len(self.delays) != len(self.stages) - 1:
            raise ConfigurationError(f'cascade of {len(self.stages)} stages needs {len(self.stages) - 1} inter-stage delays, got {len(self.delays)}')
        if any(not (math.isfinite(tau) and tau >= 0) for tau in self.all_delays):
            raise ConfigurationError(f'delays must be finite and nonnegative, got {self.all_delays!r}')
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ConfigurationError(f'mu must be positive, got {self.mu!r}')
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ConfigurationError(f'k must be nonnegative, got {self.k!r}')

    @classmethod
    def mapk(cls, *, mu=0.3, k=0.0, delays=(0.0, 0.0), feedback_delay=0.0):
        return cls(stages=mapk_stages(), delays=delays, feedback_delay=feedback_delay, mu=mu, k=k)

    @property
    def order(self):
        return len(self.stages)

    @property
    def all_delays(self):
        """
        Input delays of the stages in stage order (the feedback delay first).
        """
        return (self.feedback_delay,) + self.delays

    def with_gain(self, k):
        return replace(self, k=k)

    def with_delays(self, delays, feedback_delay):
        return replace(self, delays=tuple(delays), feedback_delay=feedback_delay)


@dataclass(frozen=True)
class SimConfig:
    """
    Fixed-step solver settings. The state before ``t = 0`` is the constant
    ``history`` (defaults to ``x0``).
    """

    x0: Tuple[float, ...]
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    history: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'x0', tuple(float(v) for v in self.x0))
        object.__setattr__(self, 'history', self.x0 if self.history is None else tuple(float(v) for v in self.history))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f'time step must be positive, got {self.dt!r}')
        if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            raise ConfigurationError(f'horizon must be at least one time step, got {self.horizon!r}')
        for name in ('x0', 'history'):
            if any(not 0 <= v <= 1 for v in getattr(self, name)):
                raise ConfigurationError(f'{name} must lie in [0, 1] componentwise, got {getattr(self, name)!r}')
        if len(self.history) != len(self.x0):
            raise ConfigurationError(f'history and x0 differ in dimension: {len(self.history)} != {len(self.x0)}')

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    def check(self, model):
        """
        Check the settings against a model.

        :raises ConfigurationError: On dimension mismatch, too short horizon, or
            a time step larger than the smallest positive delay.
        """
        if len(self.x0) != model.order:
            raise ConfigurationError(f'initial state has dimension {len(self.x0)}, model has {model.order} stages')
        max_delay = max(model.all_delays)
        if self.horizon < 10 * max_delay:
            raise ConfigurationError(f'horizon {self.horizon!r} is shorter than 10 times the largest delay {max_delay!r}')
        positive = [tau for tau in model.all_delays if tau > 0]
        if positive and self.dt > min(positive):
            raise ConfigurationError(f'time step {self.dt!r} exceeds the smallest positive delay {min(positive)!r}')


def effective_input(model, x_n_delayed):
    """
    Input ``mu / (1 + k * x)`` fed back to the first stage. Its values range
    over ``[mu / (1 + k), mu]``.
    """
    if not 0 <= x_n_delayed <= 1:
        raise DomainError(f'fed back state outside [0, 1]: {x_n_delayed!r}')
    return model.mu / (1 + model.k * x_n_delayed)


def _lag_in_steps(tau, dt):
    lag = tau / dt
    nearest = round(lag)
    return float(nearest) if abs(lag - nearest) < 1e-9 else lag


def simulate(model, cfg):
    """
    Integrate the closed-loop delay-differential system by the method of
    steps: classical fixed-step RK4, where delayed states are read from the
    already committed trajectory by linear interpolation and from the
    constant history before ``t = 0``. Every committed state is clamped to
    [0, 1].

    :param model: CascadeModel to simulate.
    :param cfg: SimConfig with the solver settings.
    :return: SampledSignal of dimension ``n``, one sample per committed step.
    :raises ConfigurationError: If ``cfg`` does not fit ``model``.
    :raises NumericalError: If the state becomes non-finite. The ``result``
        attribute holds the trajectory up to the failure.
    """
    cfg.check(model)

    n = model.order
    dt = cfg.dt
    params = [(s.b, s.c, s.d, s.e) for s in model.stages]
    sources = [n - 1] + list(range(n - 1))
    lags = [_lag_in_steps(tau, dt) for tau in model.all_delays]
    history = cfg.history
    mu, k = model.mu, model.k
    traj = [cfg.x0]

    def delayed(i, y, pos):
        src = sources[i]
        lag = lags[i]
        if lag == 0:
            return y[src]
        p = pos - lag
        if p < 0:
            return history[src]
        j = int(p)
        frac = p - j
        if frac == 0 or j >= len(traj) - 1:
            return traj[min(j, len(traj) - 1)][src]
        return (1 - frac) * traj[j][src] + frac * traj[j + 1][src]

    def rhs(y, pos):
        dy = []
        for i in range(n):
            b, c, d, e = params[i]
            x = y[i]
            v = delayed(i, y, pos)
            u = mu / (1 + k * v) if i == 0 else v
            dy.append(-b * x / (c + x) + u * d * (1 - x) / (e + 1 - x))
        return dy

    logger.info('Simulating %d steps of dt=%r (k=%r, mu=%r, delays=%r)', cfg.steps, dt, k, mu, model.all_delays)
    max_excursion = 0.0
    large_corrections = 0
    for step in range(cfg.steps):
        y = traj[-1]
        k1 = rhs(y, step)
        k2 = rhs([y[i] + 0.5 * dt * k1[i] for i in range(n)], step + 0.5)
        k3 = rhs([y[i] + 0.5 * dt * k2[i] for i in range(n)], step + 0.5)
        k4 = rhs([y[i] + dt * k3[i] for i in range(n)], step + 1)
        y = [y[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(n)]

        if not all(math.isfinite(v) for v in y):
            raise NumericalError(f'state blew up at t={(step + 1) * dt!r}: {y!r}',
                                 result=SampledSignal(traj, dt=dt))

        excursion = max(max(-v, v - 1) for v in y)
        if excursion > 0:
            max_excursion = max(max_excursion, excursion)
            if excursion > CLAMP_WARNING:
                large_corrections += 1
            y = [min(max(v, 0.0), 1.0) for v in y]
        traj.append(tuple(y))

    if large_corrections:
        logger.warning('%d states were clamped back to [0, 1] by more than %g (largest excursion: %g)',
                       large_corrections, CLAMP_WARNING, max_excursion)
    elif max_excursion > 0:
        logger.debug('Largest clamping correction: %g', max_excursion)

    return SampledSignal(traj, dt=dt)


def effective_input_signal(model, cfg, states):
    """
    Input signal ``mu / (1 + k * x_n(t - tau_n))`` seen by the first stage
    along a simulated trajectory.
    """
    times = states.times
    x_n = states.values[:, model.order - 1]
    lagged = times - model.feedback_delay
    fed_back = np.where(lagged < 0, cfg.history[model.order - 1], np.interp(np.maximum(lagged, 0), times, x_n))
    return SampledSignal(model.mu / (1 + model.k * fed_back), dt=states.dt, t0=states.t0)


def equilibrium_residual(model, x):
    """
    Largest violation ``max |f_i|`` of the steady-state equations at ``x``,
    with the undelayed closed-loop couplings.

    :raises DomainError: If ``x`` is not in [0, 1) componentwise.
    """
    x = [float(v) for v in x]
    if len(x) != model.order or any(not 0 <= v < 1 for v in x):
        raise DomainError(f'candidate equilibrium must have {model.order} components in [0, 1), got {x!r}')

    inputs = [effective_input(model, x[-1])] + x[:-1]
    return max(abs(stage.f(xi, ui)) for stage, xi, ui in zip(model.stages, x, inputs))
