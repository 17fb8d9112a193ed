"""Fixed-composition list-decoding exponents.

The central quantity is

    E(R, L, Q) = min_V  D(V || W | Q) + L * [I(Q, V) - R]_+

over test channels ``V``.  It is computed two independent ways:

* dual: ``max_{0<=rho<=L} min_V D(V||W|Q) + rho (I(Q,V) - R)``, where the
  inner minimum is an alternating minimization between the tilted test
  channel and its output distribution;
* primal: the convex program itself, handed to a conic solver.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, rel_entr

from .channel import (
    Dmc,
    as_distribution,
    composition_counts,
    conditional_divergence,
    joint_mutual_information,
    mutual_information,
)
from .optimize import Solution, maximize_on_simplex

RHO_CAP = 1e4
INNER_TOL = 1e-13
INNER_MAX_ITER = 10**4


class DivergentExponent(ArithmeticError):
    pass


@dataclass(frozen=True)
class FixedCompositionExponentQuery:
    rate: float
    L: int
    q: np.ndarray
    w: Dmc

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("list size must be a positive integer")
        object.__setattr__(self, "q", as_distribution(self.q, self.w.input_size))


@dataclass(frozen=True)
class FiniteLengthQuery:
    """Inputs of the finite-n list-error bound; ``delta_n=None`` picks the default."""

    n: int
    rate: float
    L: int
    q: np.ndarray
    w: Dmc
    delta_n: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be positive")
        if self.L < 1 or self.L > math.ceil(math.exp(self.n * self.rate) - 1e-9):
            raise ValueError("list size must satisfy 1 <= L <= e^{nR}")
        object.__setattr__(self, "q", as_distribution(self.q, self.w.input_size))

    @property
    def delta(self) -> float:
        if self.delta_n is not None:
            return self.delta_n
        return default_delta_n(self.n, self.w)


def default_delta_n(n: int, w: Dmc) -> float:
    return w.input_size * w.output_size * math.log(n + 1) / n


# --- inner problem -------------------------------------------------------------

@dataclass
class _Inner:
    rho: float
    channel: np.ndarray
    output: np.ndarray
    divergence: float
    info: float
    converged: bool
    iterations: int

    @property
    def value(self) -> float:
        return self.divergence + self.rho * self.info


class _InnerSolver:
    """min_V D(V||W|Q) + rho I(Q,V), cached per rho, warm-started across rho."""

    def __init__(self, q: np.ndarray, w: Dmc):
        self.q = q
        self.w = w.matrix
        self._v = q @ self.w
        self.cache: dict[float, _Inner] = {}

    def at(self, rho: float) -> _Inner:
        if rho in self.cache:
            return self.cache[rho]
        q, w = self.q, self.w
        if rho == 0:
            res = _Inner(0.0, w.copy(), q @ w, 0.0, mutual_information(q, w), True, 0)
            self.cache[rho] = res
            return res
        a = w ** (1.0 / (1.0 + rho))
        b = rho / (1.0 + rho)
        v = self._v.copy()
        converged = False
        it = 0
        for it in range(1, INNER_MAX_ITER + 1):
            V = a * v[None, :] ** b
            sums = V.sum(axis=1, keepdims=True)
            V = np.where(sums > 0, V / np.where(sums > 0, sums, 1.0), w)
            v_new = q @ V
            delta = float(np.max(np.abs(v_new - v)))
            v = v_new
            if delta < INNER_TOL:
                converged = True
                break
        V = a * v[None, :] ** b
        sums = V.sum(axis=1, keepdims=True)
        V = np.where(sums > 0, V / np.where(sums > 0, sums, 1.0), w)
        self._v = v
        div = conditional_divergence(V, w, q)
        info = mutual_information(q, V)
        res = _Inner(rho, V, q @ V, div, info, converged, it)
        self.cache[rho] = res
        return res


def _objective(V: np.ndarray, q: np.ndarray, w: np.ndarray, rate: float, L: float) -> float:
    return conditional_divergence(V, w, q) + L * max(0.0, mutual_information(q, V) - rate)


def _dual(rate: float, L: float, q: np.ndarray, w: Dmc, solver: _InnerSolver | None = None,
          rho_cap: float = RHO_CAP) -> Solution:
    solver = solver or _InnerSolver(q, w)
    if mutual_information(q, w.matrix) <= rate:
        inner = solver.at(0.0)
        return Solution(0.0, rho=0.0, q=q, extra={"channel": inner.channel, "info": inner.info})
    hi = min(float(L), rho_cap)
    slope = lambda r: solver.at(r).info - rate  # noqa: E731
    if math.isinf(L):
        hi = 1.0
        while slope(hi) > 0 and hi < rho_cap:
            hi = min(hi * 4.0, rho_cap)
    if slope(hi) >= 0:
        rho = hi
        if hi < L:
            inner = solver.at(rho)
            return Solution(math.inf, rho=rho, q=q, converged=inner.converged,
                            extra={"divergent": True, "channel": inner.channel,
                                   "info": inner.info})
    else:
        rho = brentq(slope, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    inner = solver.at(rho)
    value = inner.value - rho * rate
    primal = _objective(inner.channel, q, w.matrix, rate, L if math.isfinite(L) else rho)
    gap = primal - value
    ok = all(s.converged for s in solver.cache.values())
    return Solution(max(value, 0.0), rho=rho, q=q, converged=ok, gap=gap,
                    iterations=sum(s.iterations for s in solver.cache.values()),
                    extra={"channel": inner.channel, "info": inner.info})


def fixed_composition_dual(query: FixedCompositionExponentQuery) -> Solution:
    """E(R,L,Q) by the rho-dual; ``gap`` certifies min-max minus max-min."""
    return _dual(query.rate, query.L, query.q, query.w)


def fixed_composition_primal(query: FixedCompositionExponentQuery) -> Solution:
    """E(R,L,Q) by direct convex minimization over the test channel (cvxpy)."""
    import cvxpy as cp

    q, w, R, L = query.q, query.w.matrix, query.rate, query.L
    active = np.flatnonzero(q > 0)
    qa, wa = q[active], w[active]
    ka, m = wa.shape
    support = wa > 0
    V = cp.Variable((ka, m), nonneg=True)
    cons = [cp.sum(V, axis=1) == 1]
    if not support.all():
        cons.append(cp.multiply(V, (~support).astype(float)) == 0)
    w_safe = np.where(support, wa, 1.0)
    div = cp.sum(cp.multiply(qa[:, None], cp.rel_entr(V, w_safe)))
    out = qa @ V
    joint = cp.multiply(qa[:, None], V)
    prod = cp.vstack([qa[i] * out for i in range(ka)])
    info = cp.sum(cp.rel_entr(joint, prod))
    t = cp.Variable(nonneg=True)
    cons.append(t >= info - R)
    prob = cp.Problem(cp.Minimize(div + L * t), cons)
    # an inaccurate solve shows up in ``converged``; the solver warning is redundant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                       tol_feas=1e-12, max_iter=500)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-10, max_iters=200000)
    Vs = np.clip(np.asarray(V.value), 0.0, None)
    Vs = np.where(support, Vs, 0.0)
    Vs /= Vs.sum(axis=1, keepdims=True)
    full = w.copy()
    full[active] = Vs
    value = _objective(full, q, w, R, L)
    ok = prob.status in ("optimal",)
    return Solution(value, q=q, converged=ok,
                    extra={"channel": full, "info": mutual_information(q, full),
                           "solver_value": prob.value, "status": prob.status})


def _q_gradient(sol: Solution, w: Dmc) -> np.ndarray:
    V = sol.extra["channel"]
    rho = sol.rho or 0.0
    out = sol.q @ V
    g = rel_entr(V, w.matrix).sum(axis=1) + rho * rel_entr(V, out[None, :]).sum(axis=1)
    return g - g.mean()


def _optimize_q(solve, w: Dmc, restarts: int) -> Solution:
    cache: dict[bytes, Solution] = {}

    def sol(qv):
        key = qv.tobytes()
        if key not in cache:
            cache[key] = solve(qv)
        return cache[key]

    f = lambda qv: sol(qv).value  # noqa: E731
    g = lambda qv: _q_gradient(sol(qv), w)  # noqa: E731
    qstar, _, ok = maximize_on_simplex(f, w.input_size, grad=g, restarts=restarts)
    best = sol(qstar)
    return Solution(best.value, rho=best.rho, q=qstar, converged=best.converged and ok,
                    gap=best.gap, extra=best.extra)


def fixed_composition_solution(rate: float, L: int, w: Dmc, q=None,
                               restarts: int = 8) -> Solution:
    if q is not None:
        return fixed_composition_dual(FixedCompositionExponentQuery(rate, L, q, w))
    FixedCompositionExponentQuery(rate, L, np.full(w.input_size, 1.0 / w.input_size), w)
    return _optimize_q(lambda qv: _dual(rate, L, qv, w), w, restarts)


def fixed_composition_exponent(rate: float, L: int, w: Dmc, q=None) -> float:
    """E(R, L, Q) in nats; maximized over Q when ``q`` is None."""
    return fixed_composition_solution(rate, L, w, q).value


def penalized_exponent(rate: float, multiplier: float, q, w: Dmc) -> Solution:
    """min_V D(V||W|Q) + multiplier * [I(Q,V) - R]_+ for any real multiplier >= 0.

    With an integer multiplier this is E(R, L, Q); the multiplier 0 gives 0.
    """
    if multiplier < 0 or rate < 0:
        raise ValueError("multiplier and rate must be nonnegative")
    return _dual(rate, float(multiplier), as_distribution(q, w.input_size), w)


def sphere_packing_csiszar_solution(rate: float, q, w: Dmc, restarts: int = 8) -> Solution:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if q is None:
        return _optimize_q(lambda qv: _dual(rate, math.inf, qv, w), w, restarts)
    return _dual(rate, math.inf, as_distribution(q, w.input_size), w)


def sphere_packing_csiszar(rate: float, q, w: Dmc) -> float:
    """min D(V||W|Q) over test channels with I(Q,V) <= R; ``q=None`` maximizes over Q."""
    return sphere_packing_csiszar_solution(rate, q, w).value


def critical_list_size(rate: float, q, w: Dmc, cap: int = int(RHO_CAP)) -> int:
    """Smallest L at which the list exponent saturates to the sphere-packing value."""
    q = as_distribution(q, w.input_size)
    if rate <= 0:
        raise ValueError("rate must be positive")
    sol = _dual(rate, math.inf, q, w, rho_cap=float(cap))
    if math.isinf(sol.value):
        raise DivergentExponent(f"no list size up to {cap} saturates at R={rate}")
    return max(1, math.ceil(sol.rho - 1e-9))


def exponential_list_exponent(rate: float, lam: float, w: Dmc, q=None) -> float:
    """Exponent of the exponential list-size regime, L = e^{n*lam}."""
    if not 0 < lam < rate:
        raise ValueError("need 0 < lambda < rate")
    return sphere_packing_csiszar(rate - lam, q, w)


# --- finite-n bound ---------------------------------------------------------------

def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield out


def conditional_type_table(counts: np.ndarray, w: Dmc):
    """Enumerate joint types with x-marginal ``counts``.

    Returns ``(tables, log_probs)`` where ``tables`` has shape (T, |X|, |Y|)
    and ``log_probs`` is the log-probability of each joint type when ``x`` is
    any fixed sequence of that composition and ``y`` is the channel output.
    """
    m = w.output_size
    with np.errstate(divide="ignore"):
        lw = np.log(w.matrix)
    per_symbol = []
    for a, na in enumerate(counts):
        rows = np.array(list(_compositions(int(na), m)), dtype=np.int64)
        lp = gammaln(na + 1) - gammaln(rows + 1).sum(axis=1)
        lp = lp + np.where(rows > 0, rows * lw[a][None, :], 0.0).sum(axis=1)
        per_symbol.append((rows, lp))
    tables, logs = [], []
    for combo in itertools.product(*[range(len(r)) for r, _ in per_symbol]):
        tables.append(np.stack([per_symbol[a][0][j] for a, j in enumerate(combo)]))
        logs.append(sum(per_symbol[a][1][j] for a, j in enumerate(combo)))
    return np.array(tables), np.array(logs)


MAX_TYPES = 2 * 10**6


def finite_length_bound(query: FiniteLengthQuery) -> float:
    """Finite-n upper bound on the average list-error probability.

    Evaluates the average over (x, y) of
    ``exp(-n L [I_hat(x;y) + ln(L)/n - R - delta_n - 1/n]_+)`` exactly, by
    enumerating joint types with the rounded composition as x-marginal.
    """
    n, R, L, w = query.n, query.rate, query.L, query.w
    counts = composition_counts(query.q, n)
    m = w.output_size
    n_types = 1
    for na in counts:
        n_types *= math.comb(int(na) + m - 1, m - 1)
    if n_types > MAX_TYPES:
        raise ValueError(f"{n_types} joint types is too many to enumerate")
    tables, logp = conditional_type_table(counts, w)
    info = joint_mutual_information(tables)
    expo = n * L * np.maximum(0.0, info + math.log(L) / n - R - query.delta - 1.0 / n)
    terms = np.exp(logp - expo)
    return float(min(1.0, terms.sum()))
