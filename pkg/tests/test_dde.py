# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import logging
import math

import numpy as np
import pytest

import smallgain

from smallgain import CascadeModel, SimConfig


stage_1 = smallgain.mapk_stages()[0]


def plain_rk4(model, x0, dt, steps):
    """
    Delay-free closed loop integrated as an ordinary ODE system.
    """
    params = [(s.b, s.c, s.d, s.e) for s in model.stages]
    n = len(params)

    def rhs(y):
        dy = []
        for i in range(n):
            b, c, d, e = params[i]
            x = y[i]
            u = model.mu / (1 + model.k * y[n - 1]) if i == 0 else y[i - 1]
            dy.append(-b * x / (c + x) + u * d * (1 - x) / (e + 1 - x))
        return dy

    traj = [tuple(x0)]
    for _ in range(steps):
        y = traj[-1]
        k1 = rhs(y)
        k2 = rhs([y[i] + 0.5 * dt * k1[i] for i in range(n)])
        k3 = rhs([y[i] + 0.5 * dt * k2[i] for i in range(n)])
        k4 = rhs([y[i] + dt * k3[i] for i in range(n)])
        y = [y[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(n)]
        traj.append(tuple(min(max(v, 0.0), 1.0) for v in y))
    return np.array(traj)


class TestModel:

    @pytest.mark.parametrize('kwargs', [
        dict(delays=(0.0,)),
        dict(delays=(0.0, -1.0)),
        dict(delays=(0.0, math.inf)),
        dict(feedback_delay=-0.5),
        dict(mu=0.0),
        dict(k=-1.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(smallgain.ConfigurationError):
            CascadeModel(**{'stages': smallgain.mapk_stages(), 'delays': (0.0, 0.0), **kwargs})

    def test_empty(self):
        with pytest.raises(smallgain.ConfigurationError):
            CascadeModel(stages=())

    def test_delays(self):
        model = CascadeModel.mapk(delays=(1.0, 2.0), feedback_delay=3.0)
        assert model.order == 3
        assert model.all_delays == (3.0, 1.0, 2.0)
        assert model.with_gain(2.0).k == 2.0
        assert model.with_delays((0.5, 0.5), 5.0).all_delays == (5.0, 0.5, 0.5)


class TestEffectiveInput:

    @pytest.mark.parametrize('k, x, expect', [
        (0.0, 0.7, 0.3),
        (5.2, 0.0, 0.3),
        (5.2, 1.0, 0.3 / 6.2),
        (5.2, 1.0, 0.048387),
    ])
    def test_values(self, k, x, expect):
        assert smallgain.effective_input(CascadeModel.mapk(k=k), x) == pytest.approx(expect, abs=1e-6)

    def test_outside(self):
        with pytest.raises(smallgain.DomainError):
            smallgain.effective_input(CascadeModel.mapk(k=1.0), 1.5)


class TestSimConfig:

    @pytest.mark.parametrize('kwargs', [
        dict(x0=(0.0, 0.0, 0.0), dt=0.0),
        dict(x0=(0.0, 0.0, 0.0), horizon=0.001),
        dict(x0=(0.0, 1.5, 0.0)),
        dict(x0=(0.0, 0.0, 0.0), history=(0.0, 0.0)),
        dict(x0=(0.0, 0.0, 0.0), history=(0.0, 0.0, -0.1)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(smallgain.ConfigurationError):
            SimConfig(**kwargs)

    def test_history_defaults_to_initial_state(self):
        cfg = SimConfig(x0=(0.1, 0.2, 0.3), dt=0.01, horizon=10)
        assert cfg.history == (0.1, 0.2, 0.3)
        assert cfg.steps == 1000

    @pytest.mark.parametrize('cfg, model', [
        (SimConfig(x0=(0.0, 0.0), horizon=10), CascadeModel.mapk()),
        (SimConfig(x0=(0.0, 0.0, 0.0), horizon=10), CascadeModel.mapk(feedback_delay=5.0)),
        (SimConfig(x0=(0.0, 0.0, 0.0), dt=0.1, horizon=10), CascadeModel.mapk(delays=(0.05, 1.0))),
    ])
    def test_mismatch(self, cfg, model):
        with pytest.raises(smallgain.ConfigurationError):
            smallgain.simulate(model, cfg)


class TestSimulate:

    def test_shape(self):
        states = smallgain.simulate(CascadeModel.mapk(k=1.0, delays=(0.5, 0.5), feedback_delay=1.0),
                                    SimConfig(x0=(0.0, 0.0, 0.0), dt=0.01, horizon=20))
        assert len(states) == 2001
        assert states.dim == 3
        assert states.dt == 0.01
        assert np.all((states.values >= 0) & (states.values <= 1))

    def test_deterministic(self):
        model = CascadeModel.mapk(k=2.0, delays=(1.0, 2.0), feedback_delay=3.0)
        cfg = SimConfig(x0=(0.2, 0.4, 0.6), dt=0.01, horizon=40)
        assert np.array_equal(smallgain.simulate(model, cfg).values, smallgain.simulate(model, cfg).values)

    def test_history(self):
        # With a long feedback delay, the first stage is driven by the history
        # of the last one during the first time unit.
        model = CascadeModel.mapk(k=5.0, feedback_delay=1.0)
        low = smallgain.simulate(model, SimConfig(x0=(0.5, 0.5, 0.5), history=(0.5, 0.5, 0.0), dt=0.01, horizon=10))
        high = smallgain.simulate(model, SimConfig(x0=(0.5, 0.5, 0.5), history=(0.5, 0.5, 1.0), dt=0.01, horizon=10))
        assert low.values[100, 0] > high.values[100, 0]

    def test_rk4_order(self):
        model = CascadeModel.mapk(k=1.0)

        def final_state(dt):
            return smallgain.simulate(model, SimConfig(x0=(0.0, 0.0, 0.0), dt=dt, horizon=5)).values[-1]

        reference = final_state(0.01 / 8)
        coarse = np.abs(final_state(0.01) - reference).max()
        fine = np.abs(final_state(0.005) - reference).max()
        assert 0 < fine < coarse
        assert 3 < math.log2(coarse / fine) < 5

    @pytest.mark.parametrize('k, x0', [
        (0.0, (0.0, 0.0, 0.0)),
        (1.0, (0.1, 0.2, 0.3)),
        (5.2, (0.0, 0.0, 0.0)),
    ])
    def test_delay_free_reduction(self, k, x0):
        model = CascadeModel.mapk(k=k)
        states = smallgain.simulate(model, SimConfig(x0=x0, dt=0.01, horizon=20))
        assert np.array_equal(states.values, plain_rk4(model, x0, 0.01, 2000))

    @pytest.mark.parametrize('k, delays, feedback_delay', [
        (1.0, (0.0, 0.0), 0.0),
        (5.2, (0.0, 0.0), 0.0),
        (3.5, (1.0, 2.0), 3.0),
    ])
    def test_small_clamping_corrections(self, caplog, k, delays, feedback_delay):
        model = CascadeModel.mapk(k=k, delays=delays, feedback_delay=feedback_delay)
        with caplog.at_level(logging.DEBUG, logger='smallgain.dde'):
            smallgain.simulate(model, SimConfig(x0=(0.0, 0.0, 0.0), dt=0.01, horizon=200))
        assert not [record for record in caplog.records if record.levelno >= logging.WARNING]

    def test_effective_input_signal(self):
        model = CascadeModel.mapk(k=0.0)
        cfg = SimConfig(x0=(0.0, 0.0, 0.0), dt=0.01, horizon=5)
        u_eff = smallgain.effective_input_signal(model, cfg, smallgain.simulate(model, cfg))
        assert np.all(u_eff.values == 0.3)

    def test_effective_input_signal_delayed(self):
        model = CascadeModel.mapk(k=5.2, feedback_delay=1.0)
        cfg = SimConfig(x0=(0.5, 0.5, 0.5), history=(0.5, 0.5, 1.0), dt=0.01, horizon=10)
        states = smallgain.simulate(model, cfg)
        u_eff = smallgain.effective_input_signal(model, cfg, states)
        assert u_eff.values[50, 0] == pytest.approx(0.3 / 6.2)
        assert u_eff.values[300, 0] == pytest.approx(0.3 / (1 + 5.2 * states.values[200, 2]))


class TestResidual:

    def test_origin(self):
        residual = smallgain.equilibrium_residual(CascadeModel.mapk(k=1.0), (0.0, 0.0, 0.0))
        assert residual == pytest.approx(0.3 * stage_1.beta(0.0))

    def test_cascaded_equilibrium(self):
        x1 = stage_1.g_inverse(0.3)
        x2 = smallgain.mapk_stages()[1].g_inverse(x1)
        x3 = smallgain.mapk_stages()[2].g_inverse(x2)
        assert smallgain.equilibrium_residual(CascadeModel.mapk(k=0.0), (x1, x2, x3)) < 1e-9

    def test_outside(self):
        with pytest.raises(smallgain.DomainError):
            smallgain.equilibrium_residual(CascadeModel.mapk(), (0.0, 1.0, 0.0))


@pytest.mark.parametrize('stage', smallgain.mapk_stages())
def test_monotone_response(stage):
    xs = np.linspace(0, 1, 101)[:-1]
    us = np.linspace(0, 2, 21)
    for u1, u2 in zip(us, us[1:]):
        assert np.all(stage.f(xs, u1) < stage.f(xs, u2))
    assert np.all(stage.f(1.0, us) == -stage.alpha(1.0))


@pytest.mark.slow
class TestLongRuns:

    def test_open_loop_converges(self):
        model = CascadeModel.mapk(k=0.0)
        states = smallgain.simulate(model, SimConfig(x0=(0.0, 0.0, 0.0), dt=0.01, horizon=2000))
        limits = []
        for i in range(3):
            est = smallgain.estimate_limit(states.column(i), 0.2, tol=1e-4)
            assert est.converged
            limits.append(est.limit[0])
        assert limits[0] == pytest.approx(stage_1.g_inverse(0.3), abs=1e-4)
        assert smallgain.equilibrium_residual(model, limits) < 1e-6

    def test_oscillation(self):
        states = smallgain.simulate(CascadeModel.mapk(k=5.2), SimConfig(x0=(0.0, 0.0, 0.0), dt=0.01, horizon=2000))
        assert smallgain.tail_amplitude(states.column(2), 0.2) > 0.05
        assert smallgain.is_oscillatory(states.column(2), 0.2, 0.05)
