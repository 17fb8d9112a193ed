import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

import listexp.csiszar as cs
from listexp.channel import Dmc, bsc, mutual_information
from listexp.csiszar import (
    FixedCompositionExponentQuery,
    FiniteLengthQuery,
    critical_list_size,
    default_delta_n,
    exponential_list_exponent,
    fixed_composition_dual,
    fixed_composition_exponent,
    fixed_composition_primal,
    penalized_exponent,
    sphere_packing_csiszar,
    finite_length_bound,
)
from listexp.gallager import sphere_packing_exponent

W = bsc(0.1)
U = np.array([0.5, 0.5])


def binary_objective(a, b, rate, L):
    """D(V||W|U) + L [I(U,V) - R]_+ for V = [[1-a, a], [b, 1-b]], vectorized."""
    w = W.matrix
    V = np.stack([np.stack([1 - a, a], -1), np.stack([b, 1 - b], -1)], -2)
    with np.errstate(divide="ignore", invalid="ignore"):
        div = np.where(V > 0, V * np.log(V / w), 0.0).sum(axis=(-2, -1)) / 2
        out = V.mean(axis=-2, keepdims=True)
        mi = np.where(V > 0, V * np.log(V / out), 0.0).sum(axis=(-2, -1)) / 2
    return div, mi


def grid_then_refine(rate, L):
    a, b = np.meshgrid(np.linspace(0, 1, 1001), np.linspace(0, 1, 1001), indexing="ij")
    div, mi = binary_objective(a, b, rate, L)
    f = div + L * np.maximum(mi - rate, 0)
    i, j = np.unravel_index(np.argmin(f), f.shape)

    def obj(v):
        d, m = binary_objective(np.clip(v[0], 0, 1), np.clip(v[1], 0, 1), rate, L)
        return float(d + L * max(m - rate, 0))

    res = minimize(obj, [a[i, j], b[i, j]], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    return min(res.fun, float(f[i, j]))


def constrained_grid(rate):
    """min D subject to I <= R by nested grids with constraint filtering."""
    ca, cb, half = 0.5, 0.5, 0.5
    best = math.inf
    for _ in range(6):
        a, b = np.meshgrid(np.linspace(max(ca - half, 0), min(ca + half, 1), 801),
                           np.linspace(max(cb - half, 0), min(cb + half, 1), 801), indexing="ij")
        div, mi = binary_objective(a, b, rate, 1)
        div = np.where(mi <= rate, div, np.inf)
        i, j = np.unravel_index(np.argmin(div), div.shape)
        best = min(best, float(div[i, j]))
        ca, cb, half = a[i, j], b[i, j], half / 40
    return best


class TestFixedComposition:
    def test_grid_oracle_bsc_l2(self):
        got = fixed_composition_exponent(0.2, 2, W, U)
        assert got == pytest.approx(grid_then_refine(0.2, 2), abs=1e-8)

    def test_primal_and_dual_agree(self):
        q = FixedCompositionExponentQuery(0.2, 2, U, W)
        assert fixed_composition_primal(q).value == pytest.approx(
            fixed_composition_dual(q).value, abs=1e-9)

    def test_zero_when_rate_above_mutual_information(self):
        sol = fixed_composition_dual(FixedCompositionExponentQuery(0.37, 3, U, W))
        assert sol.value == 0.0
        assert np.allclose(sol.extra["channel"], W.matrix)

    def test_positive_when_rate_below_mutual_information(self):
        assert fixed_composition_exponent(0.36, 1, W, U) > 0

    def test_saturates_to_sphere_packing(self):
        rate = 0.05
        lc = critical_list_size(rate, U, W)
        sp = sphere_packing_csiszar(rate, U, W)
        for L in range(lc, lc + 6):
            assert fixed_composition_exponent(rate, L, W, U) == pytest.approx(sp, abs=1e-8)
        assert sp - fixed_composition_exponent(rate, lc - 1, W, U) > 1e-8

    def test_duality_gap_certificate(self):
        for rate, L in [(0.05, 1), (0.05, 3), (0.2, 2), (0.3, 8)]:
            sol = fixed_composition_dual(FixedCompositionExponentQuery(rate, L, U, W))
            assert abs(sol.gap) <= 1e-8

    def test_nonconvergence_is_flagged(self, monkeypatch):
        monkeypatch.setattr(cs, "INNER_MAX_ITER", 2)
        sol = fixed_composition_dual(FixedCompositionExponentQuery(0.1, 2, [0.3, 0.7], W))
        assert not sol.converged
        assert math.isfinite(sol.value) and sol.value > 0

    def test_optimized_q_not_below_uniform(self):
        z = Dmc([[1.0, 0.0], [0.3, 0.7]])
        assert fixed_composition_exponent(0.1, 2, z) >= fixed_composition_exponent(0.1, 2, z, U) - 1e-10

    def test_query_validation(self):
        with pytest.raises(ValueError):
            FixedCompositionExponentQuery(-0.1, 1, U, W)
        with pytest.raises(ValueError):
            FixedCompositionExponentQuery(0.1, 0, U, W)

    def test_penalized_zero_multiplier(self):
        assert penalized_exponent(0.2, 0.0, U, W).value == 0.0


class TestSpherePackingForm:
    def test_constrained_grid_oracle(self):
        assert sphere_packing_csiszar(0.3, U, W) == pytest.approx(constrained_grid(0.3), abs=1e-6)

    def test_zero_above_mutual_information(self):
        assert sphere_packing_csiszar(0.4, U, W) == 0.0

    def test_matches_rho_form_after_maximizing_q(self):
        # the two forms differ at a fixed asymmetric Q and agree after maximizing over it
        z = Dmc([[0.8, 0.2, 0.0], [0.05, 0.15, 0.8]])
        for rate in (0.1, 0.25):
            assert sphere_packing_csiszar(rate, None, z) == pytest.approx(
                sphere_packing_exponent(rate, z), abs=1e-6)

    def test_convex_nonincreasing(self):
        rates = np.linspace(0.02, 0.36, 18)
        vals = np.array([sphere_packing_csiszar(r, U, W) for r in rates])
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.all(np.diff(vals, 2) >= -1e-10)


class TestCriticalListSize:
    def test_one_when_saturated(self):
        assert critical_list_size(0.4, U, W) == 1
        assert critical_list_size(0.25, U, W) == 1

    def test_against_primal_scan(self):
        rate = 0.05
        sp = sphere_packing_csiszar(rate, U, W)
        scan = next(L for L in range(1, 65)
                    if sp - fixed_composition_primal(
                        FixedCompositionExponentQuery(rate, L, U, W)).value <= 1e-8)
        assert critical_list_size(rate, U, W) == scan

    def test_divergent(self):
        with pytest.raises(cs.DivergentExponent):
            critical_list_size(0.3, U, Dmc(np.eye(2)))


class TestExponentialList:
    def test_definitional_composition(self):
        assert exponential_list_exponent(0.5, 0.2, W) == sphere_packing_csiszar(0.3, None, W)

    def test_continuity_at_zero_lambda(self):
        assert exponential_list_exponent(0.2, 1e-9, W, U) == pytest.approx(
            sphere_packing_csiszar(0.2, U, W), abs=1e-7)

    def test_zero_beyond_capacity_shift(self):
        c = mutual_information(U, W)
        assert exponential_list_exponent(c + 0.3, 0.3, W) == 0.0

    @pytest.mark.parametrize("lam", [0.0, 0.5, -0.1])
    def test_precondition(self, lam):
        with pytest.raises(ValueError):
            exponential_list_exponent(0.5, lam, W)


def enumerate_bound(n, rate, L, q, w, delta):
    """Average over every x of the composition and every y of the bound summand."""
    comp = cs.composition_counts(q, n)
    base = np.repeat(np.arange(len(comp)), comp)
    xs = sorted(set(itertools.permutations(base.tolist())))
    total = 0.0
    for x in xs:
        for y in itertools.product(range(w.output_size), repeat=n):
            p = math.prod(w.matrix[a, b] for a, b in zip(x, y))
            counts = np.zeros((w.input_size, w.output_size))
            for a, b in zip(x, y):
                counts[a, b] += 1
            mi = cs.joint_mutual_information(counts)
            total += p * math.exp(-n * L * max(0.0, mi + math.log(L) / n - rate - delta - 1 / n))
    return min(1.0, total / len(xs))


class TestFiniteLengthBound:
    def test_enumeration_oracle_n8(self):
        q = FiniteLengthQuery(8, 0.3, 1, U, W)
        assert finite_length_bound(q) == pytest.approx(enumerate_bound(8, 0.3, 1, U, W, q.delta), abs=1e-12)

    def test_enumeration_oracle_no_slack(self):
        q = FiniteLengthQuery(8, 0.3, 2, [0.375, 0.625], W, delta_n=0.0)
        expected = enumerate_bound(8, 0.3, 2, [0.375, 0.625], W, 0.0)
        assert expected < 1
        assert finite_length_bound(q) == pytest.approx(expected, abs=1e-12)

    def test_default_delta(self):
        assert default_delta_n(8, W) == pytest.approx(4 * math.log(9) / 8)

    def test_clipped_when_list_covers_everything(self):
        n, rate = 8, 0.3
        L = math.ceil(math.exp(n * rate))
        assert finite_length_bound(FiniteLengthQuery(n, rate, L, U, W)) <= 1.0

    def test_list_size_precondition(self):
        with pytest.raises(ValueError):
            FiniteLengthQuery(8, 0.1, 4, U, W)

    def test_nonincreasing_in_list_size(self):
        vals = [finite_length_bound(FiniteLengthQuery(24, 0.2, L, U, W, delta_n=0.0)) for L in range(1, 8)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        assert all(v <= 1.0 for v in vals)

    @pytest.mark.parametrize("L", [1, 2])
    def test_exponent_regression(self, L):
        # with the slack term removed, n (E - exponent_n) / ln n settles on a constant
        rate = 0.2
        E = fixed_composition_exponent(rate, L, W, U)
        ns = np.array([8, 16, 24, 32, 40, 48])
        gaps = np.array([E + math.log(finite_length_bound(FiniteLengthQuery(int(n), rate, L, U, W, 0.0))) / n
                         for n in ns])
        scaled = gaps * ns / np.log(ns)
        # fitted constant from n >= 16; every point must sit close to c (ln n)/n
        c = float(np.mean(scaled[1:]))
        assert np.all(np.abs(scaled[1:] - c) <= 0.05)
        assert np.all(np.abs(gaps[1:] - c * np.log(ns[1:]) / ns[1:]) <= 0.01)


@given(st.integers(2, 4), st.integers(2, 4), st.integers(1, 8), st.floats(0.0, 1.0),
       st.integers(0, 2**32))
def test_primal_dual_property(k, m, L, frac, seed):
    rng = np.random.default_rng(seed)
    w = Dmc(rng.dirichlet(np.ones(m) * 0.6, size=k))
    q = rng.dirichlet(np.ones(k))
    rate = frac * 1.2 * math.log(min(k, m))
    query = FixedCompositionExponentQuery(rate, L, q, w)
    d = fixed_composition_dual(query)
    assert abs(d.value - fixed_composition_primal(query).value) <= 1e-6
    assert abs(d.gap) <= 1e-8
    assert (d.value == 0.0) == (mutual_information(q, w) <= rate)


@given(st.floats(0.01, 0.35), st.floats(0.01, 0.35), st.integers(1, 6))
def test_monotone_in_rate_and_list_size(r1, r2, L):
    lo, hi = sorted((r1, r2))
    assert fixed_composition_exponent(lo, L, W, U) >= fixed_composition_exponent(hi, L, W, U) - 1e-12
    assert fixed_composition_exponent(lo, L + 1, W, U) >= fixed_composition_exponent(lo, L, W, U) - 1e-12
