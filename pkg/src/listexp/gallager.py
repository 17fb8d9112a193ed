"""Exponents written as optimizations over Gallager's parameter rho.

All rates and exponents are in nats.  ``q=None`` means the input distribution
is optimized; otherwise the given distribution is held fixed.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .channel import Dmc, as_distribution
from .optimize import Solution, grid_then_golden_max, maximize_on_simplex

RHO_CAP = 1e4


def _logw(w: Dmc) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w.matrix)


def _e0_parts(rho: float, q: np.ndarray, w: Dmc):
    """Return (E0, log g_y, posterior-like weights t_xy, tilted output weights pi_y)."""
    lw = _logw(w)
    s = 1.0 / (1.0 + rho)
    with np.errstate(divide="ignore"):
        la = np.log(q)[:, None] + lw * s
    lg = logsumexp(la, axis=0)
    lF = logsumexp((1.0 + rho) * lg)
    pi = np.exp((1.0 + rho) * lg - lF)
    with np.errstate(invalid="ignore"):
        t = np.exp(la - lg[None, :])
    t = np.nan_to_num(t)
    return -lF, lg, t, pi


def e0(rho: float, q, w: Dmc) -> float:
    """Gallager's E0(rho, Q) in nats; exactly 0 at rho = 0."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return 0.0
    q = as_distribution(q, w.input_size)
    return float(_e0_parts(rho, q, w)[0])


def e0_derivative(rho: float, q, w: Dmc) -> float:
    """d E0 / d rho; equals I(Q;W) at rho = 0."""
    q = as_distribution(q, w.input_size)
    _, lg, t, pi = _e0_parts(rho, q, w)
    lw = np.where(w.matrix > 0, _logw(w), 0.0)
    inner = (t * lw).sum(axis=0)
    return float(-np.dot(pi, lg - inner / (1.0 + rho)))


def _e0_q_gradient(rho: float, q: np.ndarray, w: Dmc) -> np.ndarray:
    lw = _logw(w)
    _, lg, _, pi = _e0_parts(rho, q, w)
    a_over_g = np.exp(lw / (1.0 + rho) - lg[None, :])
    g = -(1.0 + rho) * (a_over_g * pi[None, :]).sum(axis=1)
    return g - g.mean()


def e0_optimized(rho: float, w: Dmc, restarts: int = 8, starts=None) -> tuple[float, np.ndarray]:
    """max over Q of E0(rho, Q); returns (value, maximizing Q)."""
    if rho == 0:
        return 0.0, np.full(w.input_size, 1.0 / w.input_size)
    f = lambda q: float(_e0_parts(rho, q, w)[0])  # noqa: E731
    g = lambda q: _e0_q_gradient(rho, q, w)  # noqa: E731
    q, val, _ = maximize_on_simplex(f, w.input_size, grad=g, restarts=restarts, starts=starts)
    return val, q


def _best_rho_fixed_q(rate: float, q: np.ndarray, w: Dmc, lo: float, hi: float):
    """Maximize the concave E0(rho,Q) - rho*R over [lo, hi] via its derivative.

    Returns (rho, value, slope_at_hi_positive).
    """
    slope = lambda r: e0_derivative(r, q, w) - rate  # noqa: E731
    obj = lambda r: (e0(r, q, w) if r > 0 else 0.0) - r * rate  # noqa: E731
    if slope(lo) <= 0:
        return lo, obj(lo), False
    s_hi = slope(hi)
    if s_hi >= 0:
        return hi, obj(hi), s_hi > 0
    r = brentq(slope, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)
    return r, obj(r), False


def _rho_optimized_q(rate: float, w: Dmc, lo: float, hi: float, restarts: int):
    cache: dict[float, tuple[float, np.ndarray]] = {}

    def obj(r):
        if r not in cache:
            cache[r] = e0_optimized(r, w, restarts=restarts)
        return cache[r][0] - r * rate

    if hi > 64:
        grid = np.concatenate([[lo], np.geomspace(max(lo, 1e-3), hi, 24)])
    else:
        grid = np.linspace(lo, hi, 17)
    vals = [obj(r) for r in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]

    # envelope theorem: the slope in rho is dE0/drho at the optimal Q
    def slope(r):
        obj(r)
        return e0_derivative(r, cache[r][1], w) - rate

    r = float(grid[i])
    if a < b:
        sa, sb = slope(a), slope(b)
        if sa > 0 > sb:
            r = brentq(slope, a, b, xtol=1e-12, maxiter=200)
        elif a < r < b:
            r, _ = grid_then_golden_max(obj, a, b, points=5)
    if obj(r) < vals[i]:
        r = float(grid[i])
    return r, obj(r), cache[r][1]


def random_coding_solution(rate: float, L: int, w: Dmc, q=None, restarts: int = 8) -> Solution:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if L < 1:
        raise ValueError("list size must be a positive integer")
    if q is not None:
        q = as_distribution(q, w.input_size)
        r, val, _ = _best_rho_fixed_q(rate, q, w, 0.0, float(L))
        return Solution(max(val, 0.0), rho=r, q=q)
    r, val, qstar = _rho_optimized_q(rate, w, 0.0, float(L), restarts)
    return Solution(max(val, 0.0), rho=r, q=qstar)


def random_coding_exponent(rate: float, L: int, w: Dmc, q=None) -> float:
    """sup over rho in [0, L] (and over Q if ``q`` is None) of E0(rho,Q) - rho*R."""
    return random_coding_solution(rate, L, w, q).value


def sphere_packing_solution(rate: float, w: Dmc, q=None, restarts: int = 8,
                            rho_cap: float = RHO_CAP) -> Solution:
    """Sphere-packing exponent in rho form.  ``value`` is ``inf`` when divergent."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if q is not None:
        q = as_distribution(q, w.input_size)
        r, val, divergent = _best_rho_fixed_q(rate, q, w, 0.0, rho_cap)
        if divergent:
            return Solution(math.inf, rho=r, q=q, extra={"divergent": True})
        return Solution(max(val, 0.0), rho=r, q=q)
    r, val, qstar = _rho_optimized_q(rate, w, 0.0, rho_cap, restarts)
    if r >= rho_cap * (1 - 1e-9) and e0_derivative(r, qstar, w) - rate > 0:
        return Solution(math.inf, rho=r, q=qstar, extra={"divergent": True})
    return Solution(max(val, 0.0), rho=r, q=qstar)


def sphere_packing_exponent(rate: float, w: Dmc, q=None) -> float:
    return sphere_packing_solution(rate, w, q).value


# --- expurgated exponent, Gallager's form -------------------------------------

def _product_weights(q: np.ndarray, order: int) -> np.ndarray:
    t = np.ones(())
    for _ in range(order):
        t = np.multiply.outer(t, q)
    return t


def _ex_parts(rho: float, pi: np.ndarray, d: np.ndarray):
    """log Z and tilted mean distance for Z = sum pi exp(-d/rho)."""
    mask = (pi > 0) & np.isfinite(d)
    if not np.any(mask):
        return -math.inf, 0.0
    lz_terms = np.log(pi[mask]) - d[mask] / rho
    lz = logsumexp(lz_terms)
    tilt = np.exp(lz_terms - lz)
    return float(lz), float(np.dot(tilt, d[mask]))


def _ex_objective(rho: float, pi: np.ndarray, d: np.ndarray, LR: float) -> float:
    lz, _ = _ex_parts(rho, pi, d)
    return -rho * lz - rho * LR


def _ex_slope(rho: float, pi: np.ndarray, d: np.ndarray, LR: float) -> float:
    lz, md = _ex_parts(rho, pi, d)
    return -lz - md / rho - LR


def _ex_fixed_q(rate: float, L: int, q: np.ndarray, d: np.ndarray, rho_cap: float) -> Solution:
    pi = _product_weights(q, L + 1)
    LR = L * rate
    if rate == 0:
        support = pi > 0
        if np.any(np.isinf(d[support])):
            return Solution(math.inf, rho=math.inf, q=q, extra={"divergent": True})
        return Solution(float(np.dot(pi[support], d[support])), rho=math.inf, q=q)
    if _ex_slope(1.0, pi, d, LR) <= 0:
        return Solution(max(_ex_objective(1.0, pi, d, LR), 0.0), rho=1.0, q=q)
    if _ex_slope(rho_cap, pi, d, LR) > 0:
        return Solution(math.inf, rho=rho_cap, q=q, extra={"divergent": True})
    r = brentq(lambda x: _ex_slope(x, pi, d, LR), 1.0, rho_cap, xtol=1e-13, maxiter=500)
    return Solution(max(_ex_objective(r, pi, d, LR), 0.0), rho=r, q=q)


def gallager_expurgated_solution(rate: float, L: int, w: Dmc, q=None, restarts: int = 8,
                                 rho_cap: float = RHO_CAP) -> Solution:
    from .ckm import tuple_bhattacharyya

    if rate < 0:
        raise ValueError("rate must be nonnegative")
    d = tuple_bhattacharyya(w, L)
    if q is not None:
        return _ex_fixed_q(rate, L, as_distribution(q, w.input_size), d, rho_cap)

    k = w.input_size
    order = L + 1
    B_cache: dict[float, np.ndarray] = {}

    def bhatt(rho):
        if rho not in B_cache:
            B_cache[rho] = np.exp(-d / rho) if np.isfinite(rho) else None
        return B_cache[rho]

    def poly(qv, B):
        t = B
        for _ in range(order):
            t = t @ qv if t.ndim > 1 else np.dot(t, qv)
        return float(t)

    def poly_grad(qv, B):
        t = B
        for _ in range(order - 1):
            t = t @ qv
        return order * t

    def best_q(rho):
        if not np.isfinite(rho):
            # zero-rate limit: maximize E_{Q x ... x Q}[d]
            if np.any(np.isinf(d)):
                return math.inf, np.full(k, 1.0 / k)
            f = lambda qv: poly(qv, d)  # noqa: E731
            g = lambda qv: poly_grad(qv, d)  # noqa: E731
            qv, val, _ = maximize_on_simplex(f, k, grad=g, restarts=restarts)
            return val, qv
        B = bhatt(rho)
        f = lambda qv: -rho * math.log(max(poly(qv, B), 1e-300))  # noqa: E731
        g = lambda qv: -rho * poly_grad(qv, B) / max(poly(qv, B), 1e-300)  # noqa: E731
        qv, val, _ = maximize_on_simplex(f, k, grad=g, restarts=restarts)
        return val, qv

    if rate == 0:
        val, qv = best_q(math.inf)
        extra = {"divergent": True} if math.isinf(val) else None
        return Solution(val, rho=math.inf, q=qv, extra=extra)

    LR = L * rate
    cache: dict[float, tuple[float, np.ndarray]] = {}

    def obj(rho):
        if rho not in cache:
            cache[rho] = best_q(rho)
        return cache[rho][0] - rho * LR

    r, val = grid_then_golden_max(obj, 1.0, rho_cap, log_grid=True)
    obj(r)
    qstar = cache[r][1]
    pi = _product_weights(qstar, order)
    if r >= rho_cap * (1 - 1e-9) and _ex_slope(r, pi, d, LR) > 0:
        return Solution(math.inf, rho=r, q=qstar, extra={"divergent": True})
    return Solution(max(val, 0.0), rho=r, q=qstar)


def gallager_expurgated(rate: float, L: int, w: Dmc, q=None) -> float:
    """sup over rho >= 1 of the list expurgated objective; ``inf`` when divergent."""
    return gallager_expurgated_solution(rate, L, w, q).value
