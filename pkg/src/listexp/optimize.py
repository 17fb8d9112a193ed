"""Small optimizers shared by the exponent modules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Restart seeds are fixed so every optimized-Q exponent is reproducible.
RESTART_SEED = 20130611


@dataclass(frozen=True)
class Solution:
    """Value of an optimization together with its maximizer and diagnostics."""

    value: float
    rho: float | None = None
    q: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0
    gap: float = 0.0
    extra: dict | None = None


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    k = idx[u - css / idx > 0][-1]
    tau = css[k - 1] / k
    return np.maximum(v - tau, 0.0)


def numeric_simplex_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                             h: float = 1e-6) -> np.ndarray:
    """Central differences along the simplex directions ``e_i - e_j``.

    Only the component orthogonal to the all-ones vector matters for projected
    steps, so each coordinate is probed against the mean of the others.
    """
    k = x.size
    g = np.zeros(k)
    fx = None
    for i in range(k):
        d = -np.full(k, 1.0 / (k - 1))
        d[i] = 1.0
        others = np.delete(x, i)
        fwd = min(h, (k - 1) * float(others.min()))
        back = min(h, float(x[i]))
        if fwd > 0 and back > 0:
            g[i] = (f(x + fwd * d) - f(x - back * d)) / (fwd + back)
        elif fwd > 0 or back > 0:
            fx = f(x) if fx is None else fx
            g[i] = (f(x + fwd * d) - fx) / fwd if fwd > 0 else (fx - f(x - back * d)) / back
    return g - g.mean()


def projected_gradient_ascent(f, grad, x0: np.ndarray, tol: float = 1e-10,
                              max_iter: int = 2000) -> tuple[np.ndarray, float, bool]:
    """Maximize ``f`` over the simplex from ``x0`` with Armijo backtracking."""
    x = project_simplex(x0)
    fx = f(x)
    step = 1.0
    for _ in range(max_iter):
        g = grad(x)
        improved = False
        t = step
        for _ in range(60):
            xn = project_simplex(x + t * g)
            fn = f(xn)
            if fn >= fx + 0.5 * np.dot(g, xn - x) and np.isfinite(fn):
                improved = True
                break
            t *= 0.5
        if not improved:
            return x, fx, True
        gain = fn - fx
        moved = float(np.max(np.abs(xn - x)))
        x, fx = xn, fn
        step = min(t * 2.0, 1e6)
        if gain < tol or moved < 1e-14:
            return x, fx, True
    return x, fx, False


def maximize_on_simplex(f, dim: int, grad=None, restarts: int = 8, tol: float = 1e-10,
                        seed: int = RESTART_SEED, starts: list[np.ndarray] | None = None):
    """Projected-gradient ascent from the uniform point plus Dirichlet restarts.

    Returns ``(argmax, max, converged)``.  Without ``grad`` a finite-difference
    gradient along simplex directions is used.
    """
    if grad is None:
        grad = lambda x: numeric_simplex_gradient(f, x)  # noqa: E731
    rng = np.random.default_rng(seed)
    candidates = [np.full(dim, 1.0 / dim)]
    candidates += list(starts or [])
    candidates += [rng.dirichlet(np.ones(dim)) for _ in range(restarts)]
    best = None
    all_converged = True
    for x0 in candidates:
        x, fx, ok = projected_gradient_ascent(f, grad, x0, tol=tol)
        all_converged &= ok
        if best is None or fx > best[1] + 1e-14:
            best = (x, fx)
    return best[0], best[1], all_converged


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(argmax, max)``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fx, x = max(cands)
    return x, fx


def grid_then_golden_max(f, lo: float, hi: float, points: int = 33, tol: float = 1e-10,
                         log_grid: bool = False):
    """Coarse grid scan followed by golden section around the best grid point.

    Used where unimodality is not guaranteed (objectives maximized over the
    input distribution first).
    """
    if log_grid and lo > 0:
        grid = np.geomspace(lo, hi, points)
    elif log_grid:
        grid = np.concatenate([[0.0], np.geomspace(max(hi * 1e-6, 1e-6), hi, points - 1)])
    else:
        grid = np.linspace(lo, hi, points)
    vals = [f(g) for g in grid]
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_section_max(f, a, b, tol=tol)
    if vals[i] > fx:
        return float(grid[i]), float(vals[i])
    return x, fx
