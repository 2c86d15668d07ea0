# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import math

import numpy as np
import pytest

from hypothesis import given, strategies as st

import smallgain


def constant(value):
    return smallgain.SampledSignal.from_function(lambda t: np.full_like(t, value), dt=0.01, t_end=100)


sine = smallgain.SampledSignal.from_function(np.sin, dt=0.01, t_end=100)
decay = smallgain.SampledSignal.from_function(lambda t: np.exp(-t), dt=0.01, t_end=50)
circle = smallgain.SampledSignal.from_function(lambda t: np.column_stack([np.cos(t), np.sin(t)]), dt=0.01, t_end=100)


class TestSampledSignal:

    def test_shape(self):
        assert len(sine) == 10001
        assert sine.dim == 1
        assert circle.dim == 2
        assert sine.span == pytest.approx(100)
        assert sine.times[-1] == pytest.approx(100)

    def test_read_only(self):
        with pytest.raises(ValueError):
            sine.values[0, 0] = 1.0

    @pytest.mark.parametrize('values, dt', [
        ([], 0.1),
        ([[]], 0.1),
        ([0.0, math.nan], 0.1),
        ([0.0, math.inf], 0.1),
        ([0.0, 1.0], 0.0),
        ([0.0, 1.0], -0.1),
    ])
    def test_degenerate(self, values, dt):
        with pytest.raises(smallgain.DegenerateInputError):
            smallgain.SampledSignal(values, dt=dt)

    @pytest.mark.parametrize('tail_fraction, index', [
        (1.0, 0),
        (0.5, 5000),
        (0.2, 8000),
    ])
    def test_tail_start_index(self, tail_fraction, index):
        assert sine.tail_start_index(tail_fraction) == index

    @pytest.mark.parametrize('tail_fraction', [0, -0.1, 1.5, math.nan])
    def test_invalid_tail_fraction(self, tail_fraction):
        with pytest.raises(smallgain.DomainError):
            sine.tail_start_index(tail_fraction)


class TestTailAmplitude:

    @pytest.mark.parametrize('tail_fraction', [0.1, 0.2, 1.0])
    def test_constant(self, tail_fraction):
        assert smallgain.tail_amplitude(constant(1.0), tail_fraction) == 0

    def test_sine(self):
        assert smallgain.tail_amplitude(sine, 0.5) == pytest.approx(2.0, abs=2 * 0.01)

    def test_decay(self):
        assert smallgain.tail_amplitude(decay, 0.2) == pytest.approx(math.exp(-40) - math.exp(-50), rel=1e-9)

    def test_circle(self):
        assert smallgain.tail_amplitude(circle, 0.5) == pytest.approx(2.0, abs=1e-3)

    def test_thinned_circle(self):
        long_circle = smallgain.SampledSignal.from_function(lambda t: np.column_stack([np.cos(t), np.sin(t)]), dt=0.01, t_end=500)
        assert smallgain.tail_amplitude(long_circle, 1.0) == pytest.approx(2.0, abs=1e-3)

    def test_too_short(self):
        with pytest.raises(smallgain.DegenerateInputError):
            smallgain.tail_amplitude(smallgain.SampledSignal([0.0, 1.0], dt=1.0), 0.2)

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=10, max_size=200),
           st.floats(min_value=-1e3, max_value=1e3))
    def test_offset_invariance(self, values, shift):
        sig = smallgain.SampledSignal(values, dt=0.5)
        shifted = smallgain.SampledSignal([v + shift for v in values], dt=0.5)
        amplitude = smallgain.tail_amplitude(sig, 0.5)
        assert 0 <= amplitude <= max(values) - min(values)
        assert smallgain.tail_amplitude(shifted, 0.5) == pytest.approx(amplitude, abs=1e-9)

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=100),
           st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=100))
    def test_prepended_samples(self, prefix, tail):
        sig = smallgain.SampledSignal(prefix + tail, dt=0.5)
        tail_fraction = 1 - len(prefix) / (len(sig) - 1)
        assert sig.tail_start_index(tail_fraction) == len(prefix)
        assert smallgain.tail_amplitude(sig, tail_fraction) == smallgain.tail_amplitude(smallgain.SampledSignal(tail, dt=0.5), 1.0)

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=3, max_size=200),
           st.floats(min_value=0.5, max_value=1.0))
    def test_all_pairs(self, values, tail_fraction):
        sig = smallgain.SampledSignal(values, dt=0.1)
        tail = values[sig.tail_start_index(tail_fraction):]
        assert smallgain.tail_amplitude(sig, tail_fraction) == max(abs(a - b) for a in tail for b in tail)

    @pytest.mark.parametrize('dim, seed', [
        (2, 0),
        (3, 1),
        (5, 2),
    ])
    def test_all_pairs_vector(self, dim, seed):
        values = np.random.default_rng(seed).normal(size=(200, dim))
        expect = max(np.linalg.norm(a - b) for a in values for b in values)
        assert smallgain.tail_amplitude(smallgain.SampledSignal(values, dt=0.1), 1.0) == pytest.approx(expect, rel=1e-12)

    @pytest.mark.parametrize('sig', [
        decay,
        smallgain.SampledSignal.from_function(lambda t: 1 / (1 + t), dt=0.01, t_end=100),
        smallgain.SampledSignal.from_function(lambda t: np.column_stack([np.exp(-t), 1 - np.exp(-0.5 * t)]), dt=0.01, t_end=50),
    ])
    def test_monotone_refinement(self, sig):
        amplitudes = [smallgain.tail_amplitude(sig, f) for f in (0.05, 0.1, 0.2, 0.5, 1.0)]
        assert amplitudes == sorted(amplitudes)

    @pytest.mark.parametrize('dim, row, col', [
        (2, 1, 0),
        (2, 20000, 1),
        (3, 12346, 2),
    ])
    def test_thinning_keeps_extremes(self, dim, row, col):
        values = np.zeros((20001, dim))
        values[row, col] = 1.0
        assert smallgain.tail_amplitude(smallgain.SampledSignal(values, dt=0.01), 1.0) == 1.0


class TestEstimateLimit:

    def test_constant(self):
        est = smallgain.estimate_limit(constant(0.3), 0.2, tol=1e-6)
        assert est.amplitude == 0
        assert est.converged
        assert est.limit == pytest.approx((0.3,))
        assert est.tail_start == pytest.approx(80)

    def test_sine(self):
        est = smallgain.estimate_limit(sine, 0.2, tol=1e-3)
        assert not est.converged
        assert est.limit is None

    def test_decay(self):
        est = smallgain.estimate_limit(decay, 0.2, tol=1e-6)
        assert est.converged
        assert abs(est.limit[0]) <= math.exp(-40)

    def test_invalid_tol(self):
        with pytest.raises(smallgain.DomainError):
            smallgain.estimate_limit(sine, 0.2, tol=0)


@pytest.mark.parametrize('sig, threshold, expect', [
    (constant(1.0), 1e-3, False),
    (sine, 0.05, True),
    (decay, 0.01, False),
])
def test_is_oscillatory(sig, threshold, expect):
    assert smallgain.is_oscillatory(sig, 0.2, threshold) is expect


@pytest.mark.parametrize('amplitude, expect', [
    (0.0, smallgain.Outcome.CONVERGED),
    (1e-5, smallgain.Outcome.CONVERGED),
    (1e-3, smallgain.Outcome.UNSETTLED),
    (0.01, smallgain.Outcome.OSCILLATORY),
    (2.0, smallgain.Outcome.OSCILLATORY),
])
def test_outcome(amplitude, expect):
    assert smallgain.Outcome.classify(amplitude, tol=1e-4, threshold=0.01) is expect
