"""List-decoding expurgated exponent built on multi-information.

The inner problem is

    min  E_P[d(X_0..X_L)] + I(X_0;...;X_L)
    s.t. every marginal of P equals Q,  I(X_0;...;X_L) <= L*R,

which is convex in P.  With the marginals pinned, ``I = (L+1) H(Q) - H(P)``,
so for a multiplier ``s`` the Lagrangian ``E d + s I`` is minimized by
``P = exp(-d/s) * phi_0(x_0) * ... * phi_L(x_L)``.  The scalings ``phi_i`` are
found by iterative proportional fitting and ``s`` by root finding on the
multi-information constraint.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from .channel import Dmc, as_distribution, entropy
from .optimize import Solution, maximize_on_simplex

MAX_TUPLE_ENTRIES = 10**5
# below this multi-information the entropy difference is lost in rounding
INFO_FLOOR = 1e-13


class SizeCapExceeded(ValueError):
    pass


def _check_size(k: int, L: int):
    if L < 1:
        raise ValueError("list size must be a positive integer")
    if k ** (L + 1) > MAX_TUPLE_ENTRIES:
        raise SizeCapExceeded(
            f"|X|^(L+1) = {k}^{L + 1} exceeds the supported {MAX_TUPLE_ENTRIES} entries"
        )


def tuple_bhattacharyya(w: Dmc, L: int) -> np.ndarray:
    """d(x_0..x_L) = -ln sum_y prod_i w(y|x_i)^(1/(L+1)), as a dense tensor.

    Entries are computed from the symbol counts of each tuple, so the table is
    exactly invariant under coordinate permutations; ``+inf`` marks tuples
    whose rows have disjoint supports.
    """
    k = w.input_size
    _check_size(k, L)
    order = L + 1
    with np.errstate(divide="ignore"):
        lw = np.log(w.matrix)
    idx = np.indices((k,) * order).reshape(order, -1).T
    counts = np.zeros((idx.shape[0], k))
    for i in range(order):
        counts[np.arange(idx.shape[0]), idx[:, i]] += 1
    # counts @ lw with 0 * (-inf) treated as 0
    with np.errstate(invalid="ignore"):
        terms = np.where(counts[:, :, None] > 0, counts[:, :, None] * lw[None, :, :], 0.0)
    expo = terms.sum(axis=1) / order
    d = -logsumexp(expo, axis=1)
    d[counts.max(axis=1) == order] = 0.0
    d = np.where(np.isnan(d), math.inf, d)
    d = np.maximum(d, 0.0)
    return d.reshape((k,) * order)


def _marginal(P: np.ndarray, i: int) -> np.ndarray:
    return P.sum(axis=tuple(a for a in range(P.ndim) if a != i))


def _assemble(K: np.ndarray, phi: np.ndarray) -> np.ndarray:
    P = K.copy()
    k = K.shape[0]
    for i in range(K.ndim):
        shape = [1] * K.ndim
        shape[i] = k
        P *= phi[i].reshape(shape)
    return P


def _ipf(K: np.ndarray, q: np.ndarray, phi: np.ndarray | None = None, tol: float = 1e-13,
         max_iter: int = 10**5):
    """Scale ``K`` so that every marginal equals ``q``.  Returns (P, phi, converged)."""
    order, k = K.ndim, K.shape[0]
    phi = np.ones((order, k)) if phi is None else phi.copy()
    for it in range(max_iter):
        for i in range(order):
            m = _marginal(_assemble(K, phi), i)
            phi[i] = np.where(m > 0, phi[i] * q / np.where(m > 0, m, 1.0), phi[i])
        # renormalize the potentials to avoid drift
        scale = phi.max(axis=1, keepdims=True)
        phi /= scale
        phi[0] *= float(np.prod(scale))
        P = _assemble(K, phi)
        P /= P.sum()
        err = max(np.abs(_marginal(P, i) - q).sum() for i in range(order))
        if err < tol:
            return P, phi, True
    return P, phi, False


def expected_distance(P: np.ndarray, d: np.ndarray) -> float:
    mask = P > 0
    if np.any(np.isinf(d[mask])):
        return math.inf
    return float(np.dot(P[mask], d[mask]))


def _multi_info_pinned(P: np.ndarray, q: np.ndarray) -> float:
    return max(0.0, P.ndim * entropy(q) - entropy(P))


@dataclass
class _Tilted:
    s: float
    P: np.ndarray
    distance: float
    info: float
    converged: bool


class _TiltedFamily:
    """Minimizers of E d + s I over joints with marginals q, indexed by s."""

    def __init__(self, d: np.ndarray, q: np.ndarray):
        support = q > 0
        self.full_q = q
        self.support = support
        sl = np.ix_(*([np.flatnonzero(support)] * d.ndim))
        self.d = d[sl]
        self.q = q[support] / q[support].sum()
        self._phi = None
        self.cache: dict[float, _Tilted] = {}

    def at(self, s: float) -> _Tilted:
        if s in self.cache:
            return self.cache[s]
        with np.errstate(over="ignore"):
            K = np.exp(-self.d / s)
        P, phi, ok = _ipf(K, self.q, self._phi)
        self._phi = phi
        t = _Tilted(s, P, expected_distance(P, self.d), _multi_info_pinned(P, self.q), ok)
        self.cache[s] = t
        return t

    def product(self) -> np.ndarray:
        t = np.ones(())
        for _ in range(self.d.ndim):
            t = np.multiply.outer(t, self.q)
        return t

    def embed(self, P: np.ndarray) -> np.ndarray:
        k = self.full_q.size
        out = np.zeros((k,) * P.ndim)
        out[np.ix_(*([np.flatnonzero(self.support)] * P.ndim))] = P
        return out

    def solve_info(self, target: float, s_lo: float) -> _Tilted:
        """Smallest-distance member with multi-information equal to ``target``.

        Assumes I(P_{s_lo}) > target; the multi-information decreases in s.
        """
        s_hi = max(2.0 * s_lo, 1.0)
        while self.at(s_hi).info > target:
            s_hi *= 4.0
            if s_hi > 1e12:
                break
        f = lambda u: self.at(math.exp(u)).info - target  # noqa: E731
        u = brentq(f, math.log(s_lo), math.log(s_hi), xtol=1e-14, rtol=1e-15, maxiter=300)
        return self.at(math.exp(u))

    def distance_at_info(self, target: float, s_lo: float) -> _Tilted:
        """Like ``solve_info``, extended below INFO_FLOOR by the square-root law.

        Near the product joint the distance drops like sqrt(I), so tiny targets
        are scaled from the member at the floor instead of being resolved.
        """
        if target >= INFO_FLOOR:
            return self.solve_info(target, s_lo)
        t = self.solve_info(INFO_FLOOR, s_lo)
        d0 = expected_distance(self.product(), self.d)
        dist = d0 - (d0 - t.distance) * math.sqrt(max(target, 0.0) / INFO_FLOOR)
        return _Tilted(t.s, t.P, dist, t.info, t.converged)

    def lp_minimum(self) -> float:
        """min E d subject to the marginal constraints only (a transport LP)."""
        k, order = self.q.size, self.d.ndim
        cost = np.where(np.isfinite(self.d), self.d, 0.0).ravel()
        bounds = [(0, 0) if not np.isfinite(v) else (0, None) for v in self.d.ravel()]
        rows, rhs = [], []
        idx = np.indices(self.d.shape).reshape(order, -1)
        for i in range(order):
            for x in range(k):
                rows.append((idx[i] == x).astype(float))
                rhs.append(self.q[x])
        res = linprog(cost, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=bounds,
                      method="highs")
        return float(res.fun)


def _ckm_fixed_q(rate: float, L: int, q: np.ndarray, d: np.ndarray) -> Solution:
    fam = _TiltedFamily(d, q)
    LR = L * rate
    if LR <= 0:
        P = fam.product()
        val = expected_distance(P, fam.d)
        return Solution(val, q=q, extra={"joint": fam.embed(P), "multiplier": math.inf,
                                         "critical_rate": None})
    free = fam.at(1.0)
    crit = free.info / L
    if free.info <= LR:
        # the affine continuation is clipped at zero, as the other exponents are
        val = free.distance + free.info - LR
        return Solution(max(val, 0.0), q=q, converged=free.converged,
                        extra={"joint": fam.embed(free.P), "multiplier": 0.0, "unclipped": val,
                               "critical_rate": crit, "region": "affine"})
    t = fam.distance_at_info(LR, 1.0)
    return Solution(t.distance, q=q, converged=t.converged,
                    extra={"joint": fam.embed(t.P), "multiplier": t.s - 1.0,
                           "critical_rate": crit, "region": "curved"})


def ckm_solution(rate: float, L: int, w: Dmc, q=None, restarts: int = 8) -> Solution:
    """Expurgated exponent with the minimizing joint in ``extra['joint']``."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    d = tuple_bhattacharyya(w, L)
    if q is not None:
        return _ckm_fixed_q(rate, L, as_distribution(q, w.input_size), d)
    f = lambda qv: _ckm_fixed_q(rate, L, qv, d).value  # noqa: E731
    qstar, _, ok = maximize_on_simplex(f, w.input_size, restarts=restarts, tol=1e-12)
    sol = _ckm_fixed_q(rate, L, qstar, d)
    return Solution(sol.value, q=qstar, converged=sol.converged and ok, extra=sol.extra)


def ckm_exponent(rate: float, L: int, w: Dmc, q=None) -> float:
    return ckm_solution(rate, L, w, q).value


def distortion_rate(rate: float, L: int, w: Dmc, q, s_min: float = 1e-2) -> float:
    """min E d over joints with marginals q and multi-information <= L*R."""
    q = as_distribution(q, w.input_size)
    d = tuple_bhattacharyya(w, L)
    fam = _TiltedFamily(d, q)
    LR = L * rate
    if LR <= 0:
        return expected_distance(fam.product(), fam.d)
    finite = fam.d[np.isfinite(fam.d) & (fam.d > 0)]
    scale = float(np.median(finite)) if finite.size else 1.0
    lo = s_min * scale
    if fam.at(lo).info <= LR:
        return fam.lp_minimum()
    return fam.distance_at_info(LR, lo).distance


def ckm_critical_rate(L: int, w: Dmc, q) -> float:
    """Multi-information of the unconstrained minimizer of E d + I, divided by L."""
    q = as_distribution(q, w.input_size)
    fam = _TiltedFamily(tuple_bhattacharyya(w, L), q)
    return fam.at(1.0).info / L


def symmetrize(P: np.ndarray) -> np.ndarray:
    """Average a tuple joint over all coordinate permutations."""
    perms = list(itertools.permutations(range(P.ndim)))
    return sum(np.transpose(P, p) for p in perms) / len(perms)
