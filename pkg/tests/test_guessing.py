import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from listexp.channel import Dmc, bsc, mutual_information
from listexp.gallager import random_coding_exponent, sphere_packing_exponent
from listexp.guessing import (
    GuessingQuery,
    capacity,
    conjectured_residual,
    conjectured_threshold,
    exponent_sign_change,
    guessing_moment_conjectured_exponent,
    guessing_moment_lower_exponent,
    sp_rho_achiever,
)

W = bsc(0.1)
C = math.log(2) - (-(0.1 * math.log(0.1) + 0.9 * math.log(0.9)))


def e0_star_grid(rho, w, points=20001):
    """max over binary q of E0 by a dense grid; independent of the simplex solver."""
    qs = np.linspace(0, 1, points)
    P = w.matrix
    a = P[0] ** (1 / (1 + rho))
    b = P[1] ** (1 / (1 + rho))
    mix = qs[:, None] * a + (1 - qs[:, None]) * b
    vals = -np.log((mix ** (1 + rho)).sum(axis=1))
    return float(vals.max())


def lower(rho, rate, w=W):
    return guessing_moment_lower_exponent(GuessingQuery(rho, rate, w))


def conj(rho, rate, w=W):
    return guessing_moment_conjectured_exponent(GuessingQuery(rho, rate, w))


class TestAchiever:
    def test_capacity(self):
        assert capacity(W) == pytest.approx(C, abs=1e-10)

    @pytest.mark.parametrize("rate", [C, C + 0.05])
    def test_zero_above_capacity(self, rate):
        assert sp_rho_achiever(rate, W) == 0.0

    @pytest.mark.parametrize("rate", [0.1, 0.2, 0.3])
    def test_finite_difference(self, rate):
        h = 1e-4
        fd = -(sphere_packing_exponent(rate + h, W) - sphere_packing_exponent(rate - h, W)) / (2 * h)
        assert sp_rho_achiever(rate, W) == pytest.approx(fd, abs=1e-3)

    def test_grid_oracle(self):
        rate = 0.3
        rhos = np.linspace(0, 5, 50001)
        a = W.matrix[:, None, :] ** (1 / (1 + rhos[None, :, None]))
        vals = -np.log(((0.5 * a.sum(axis=0)) ** (1 + rhos[:, None])).sum(axis=1)) - rhos * rate
        assert sp_rho_achiever(rate, W) == pytest.approx(rhos[np.argmax(vals)], abs=2e-4)

    def test_query_validation(self):
        with pytest.raises(ValueError):
            GuessingQuery(0.0, 0.2, W)
        with pytest.raises(ValueError):
            GuessingQuery(1.0, 0.0, W)


class TestLowerExponent:
    def test_small_rho_is_sphere_packing(self):
        assert lower(1e-6, 0.2).value == pytest.approx(-sphere_packing_exponent(0.2, W), abs=1e-9)

    @pytest.mark.parametrize("rate", [0.05, 0.15, 0.2, 0.3])
    def test_continuity_at_achiever(self, rate):
        thr = sp_rho_achiever(rate, W)
        left = lower(thr, rate).value
        right = lower(thr * (1 + 1e-9) + 1e-12, rate).value
        assert lower(thr, rate).branch == "sphere-packing"
        assert abs(left - right) <= 1e-6

    def test_large_rho_slope(self):
        rate, rho, h = 0.2, 6.0, 1e-4
        fd = (lower(rho + h, rate).value - lower(rho - h, rate).value) / (2 * h)
        de0 = (e0_star_grid(rho + h, W) - e0_star_grid(rho - h, W)) / (2 * h)
        assert fd == pytest.approx(rate - de0, abs=1e-5)

    def test_bsc_rho_two(self):
        assert lower(2.0, 0.2).value == pytest.approx(0.4 - e0_star_grid(2.0, W), abs=1e-9)

    def test_sign_change(self):
        rho0 = exponent_sign_change(0.2, W)
        assert abs(lower(rho0, 0.2).value) <= 1e-9
        assert lower(rho0 - 0.1, 0.2).value < 0 < lower(rho0 + 0.1, 0.2).value


class TestConjecture:
    def test_flagged(self):
        assert conj(1.0, 0.2).conjecture is True
        assert lower(1.0, 0.2).conjecture is False

    def test_coincides_above_critical_rate(self):
        for rho in (0.2, 0.5, 1.0, 3.0):
            assert conj(rho, 0.3).value == pytest.approx(lower(rho, 0.3).value, abs=1e-9)

    @pytest.mark.parametrize("rate", [0.02, 0.05, 0.1, 0.2])
    def test_residual(self, rate):
        assert conjectured_residual(rate, W) <= 1e-8

    def test_low_rate_random_coding_branch(self):
        rate = 0.05
        thr = conjectured_threshold(rate, W)
        assert thr > sp_rho_achiever(rate, W)
        assert conj(0.5 * thr, rate).value == pytest.approx(-random_coding_exponent(rate, 1, W), abs=1e-9)

    @given(st.floats(0.05, 8.0), st.sampled_from([0.03, 0.08, 0.15, 0.25]))
    @settings(max_examples=30)
    def test_dominates_lower(self, rho, rate):
        lo, hi = lower(rho, rate), conj(rho, rate)
        assert hi.value >= lo.value - 1e-9
        if rho > max(lo.threshold, hi.threshold):
            assert hi.value == pytest.approx(lo.value, abs=1e-12)

    @pytest.mark.parametrize("rate", [0.05, 0.2])
    def test_nondecreasing_in_rho(self, rate):
        rhos = np.linspace(0.05, 6, 80)
        for f in (lower, conj):
            vals = [f(r, rate).value for r in rhos]
            assert np.all(np.diff(vals) >= -1e-9)

    def test_asymmetric_channel(self):
        z = Dmc([[0.95, 0.05], [0.3, 0.7]])
        rate = 0.5 * max(mutual_information([q, 1 - q], z.matrix) for q in np.linspace(0, 1, 101))
        for rho in (0.3, 1.0, 4.0):
            assert conj(rho, rate, z).value >= lower(rho, rate, z).value - 1e-9
