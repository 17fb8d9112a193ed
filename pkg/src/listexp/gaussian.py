"""Expurgated list exponent of the power-constrained additive Gaussian channel.

For Gaussian codeword tuples the tuple distance and the multi-information
depend only on the correlation matrix of the tuple.  The optimum is attained
at the totally symmetric matrix with common correlation ``rho``, for which

    distance(rho) = S L (1 - rho) / (2 sigma^2 (L+1))
    info(rho)     = -(1/2) [ln(1 + rho L) + L ln(1 - rho)].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BISECT_ITER = 200


@dataclass(frozen=True)
class GaussianSpec:
    power: float
    noise_var: float

    def __post_init__(self):
        if not (self.power > 0 and self.noise_var > 0):
            raise ValueError("power and noise variance must be positive")
        if not (math.isfinite(self.power) and math.isfinite(self.noise_var)):
            raise ValueError("power and noise variance must be finite")

    @property
    def snr(self) -> float:
        return self.power / self.noise_var


class CorrelationMatrix:
    """Symmetric unit-diagonal positive-definite matrix of dimension L+1."""

    def __init__(self, matrix):
        a = np.array(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError("correlation matrix must be square with dimension >= 2")
        if not np.allclose(a, a.T, atol=1e-12, rtol=0):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(a), 1.0, atol=1e-12, rtol=0):
            raise ValueError("correlation matrix must have unit diagonal")
        off = a[~np.eye(a.shape[0], dtype=bool)]
        if np.any(np.abs(off) >= 1):
            raise ValueError("off-diagonal correlations must lie in (-1, 1)")
        # leading principal minors; the dimension is tiny
        for k in range(1, a.shape[0] + 1):
            if np.linalg.det(a[:k, :k]) <= 0:
                raise ValueError("correlation matrix is not positive definite")
        self.matrix = (a + a.T) / 2.0

    @classmethod
    def symmetric(cls, rho: float, L: int) -> "CorrelationMatrix":
        m = np.full((L + 1, L + 1), rho)
        np.fill_diagonal(m, 1.0)
        return cls(m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def L(self) -> int:
        return self.dimension - 1

    def logdet(self) -> float:
        sign, val = np.linalg.slogdet(self.matrix)
        return float(val)

    def multi_information(self) -> float:
        return -0.5 * self.logdet()


def gaussian_tuple_distance_rate(corr: CorrelationMatrix, spec: GaussianSpec) -> float:
    """Per-symbol tuple distance of Gaussian codewords with the given correlations."""
    if not isinstance(corr, CorrelationMatrix):
        corr = CorrelationMatrix(corr)
    L = corr.L
    if L < 1:
        raise ValueError("need at least two codewords")
    m = corr.matrix
    pair_sum = float(m[np.triu_indices(L + 1, 1)].sum())
    return L * spec.power / (2.0 * spec.noise_var * (L + 1) ** 2) * (L + 1 - 2.0 / L * pair_sum)


def symmetric_logdet(rho: float, L: int) -> float:
    """ln det of the (L+1)x(L+1) matrix with unit diagonal and off-diagonals rho."""
    if L < 1:
        raise ValueError("L must be a positive integer")
    if not (-1.0 / L < rho < 1.0):
        raise ValueError(f"rho={rho} is outside the positive-definite range (-1/{L}, 1)")
    return math.log1p(rho * L) + L * math.log1p(-rho)


def symmetric_multi_information(rho: float, L: int) -> float:
    return -0.5 * symmetric_logdet(rho, L)


def _info_derivative(rho: float, L: int) -> float:
    """d/drho of the symmetric multi-information."""
    return 0.5 * L * rho * (L + 1) / ((1 + rho * L) * (1 - rho))


def _bisect(f, lo: float, hi: float, iters: int = BISECT_ITER) -> float:
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rho_residual(rho: float, rate: float, L: int) -> float:
    return symmetric_multi_information(rho, L) - L * rate


def _polish(rho: float, rate: float, L: int) -> float:
    # one or two Newton steps on the defining equation; harmless near the root
    for _ in range(2):
        if not 0 < rho < 1:
            break
        d = _info_derivative(rho, L)
        if d <= 0:
            break
        nxt = rho - rho_residual(rho, rate, L) / d
        if 0 < nxt < 1 and abs(rho_residual(nxt, rate, L)) <= abs(rho_residual(rho, rate, L)):
            rho = nxt
    return rho


def rho_closed_form_l2(rate: float) -> float:
    """Root in [0,1) of 2 rho^3 - 3 rho^2 + (1 - e^{-4R}) = 0 by the cosine formula."""
    a = -math.expm1(-4.0 * rate)
    theta = math.acos(max(-1.0, min(1.0, 1.0 - 2.0 * a)))
    return 0.5 + math.cos(theta / 3.0 - 2.0 * math.pi / 3.0)


def rho_bisection(rate: float, L: int) -> float:
    if rate == 0:
        return 0.0
    return _bisect(lambda r: rho_residual(r, rate, L), 0.0, 1.0 - 1e-16)


def gaussian_rho_of_rate(rate: float, L: int) -> float:
    """Common correlation of the symmetric tuple whose multi-information is L*R."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if L < 1:
        raise ValueError("L must be a positive integer")
    if rate == 0:
        return 0.0
    if L == 1:
        rho = math.sqrt(-math.expm1(-2.0 * rate))
    elif L == 2:
        rho = rho_closed_form_l2(rate)
    else:
        rho = rho_bisection(rate, L)
    return _polish(rho, rate, L)


def curvy_exponent(rate: float, L: int, spec: GaussianSpec) -> float:
    rho = gaussian_rho_of_rate(rate, L)
    return spec.power * L * (1.0 - rho) / (2.0 * spec.noise_var * (L + 1))


def curvy_slope(rate: float, L: int, spec: GaussianSpec) -> float:
    """dE/dR of the curvy part, using d rho / dR = L / info'(rho)."""
    rho = gaussian_rho_of_rate(rate, L)
    if rho == 0:
        return -math.inf
    drho = L / _info_derivative(rho, L)
    return -spec.power * L / (2.0 * spec.noise_var * (L + 1)) * drho


@dataclass(frozen=True)
class Tangency:
    rate: float
    rho: float
    value: float


def tangency_point(L: int, spec: GaussianSpec, tol: float = 1e-10) -> Tangency:
    """Rate R0 where the curvy part has slope -L (bisection on R)."""
    f = lambda r: curvy_slope(r, L, spec) + L  # noqa: E731  negative below R0
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise ArithmeticError("tangency rate not bracketed")
    lo = 0.0
    while hi - lo > tol * 1e-3:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    r0 = 0.5 * (lo + hi)
    rho0 = gaussian_rho_of_rate(r0, L)
    return Tangency(r0, rho0, curvy_exponent(r0, L, spec))


def gaussian_ckm_exponent(rate: float, L: int, spec: GaussianSpec,
                          tangency: Tangency | None = None) -> float:
    """Curvy part below R0, affine continuation with slope -L above it."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    t = tangency or tangency_point(L, spec)
    if rate < t.rate:
        return curvy_exponent(rate, L, spec)
    return max(0.0, t.value - L * (rate - t.rate))


def symmetric_objective_minimum(rate: float, L: int, spec: GaussianSpec) -> float:
    """min of distance + multi-information over symmetric tuples with info <= L*R."""
    t = tangency_point(L, spec)
    if rate < t.rate:
        return curvy_exponent(rate, L, spec) + L * rate
    return t.value + L * t.rate


@dataclass
class SymmetryReport:
    ok: bool
    trials: int
    feasible: int
    violations: int
    worst_margin: float
    symmetric_value: float
    symmetrization_violations: int


def _random_correlation(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal((dim, dim + int(rng.integers(0, 3))))
    v *= rng.uniform(0.1, 3.0, size=(dim, 1))
    v += rng.standard_normal((1, v.shape[1])) * rng.uniform(0, 3)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    c = v @ v.T
    np.fill_diagonal(c, 1.0)
    return c


def symmetric_optimality_check(L: int, spec: GaussianSpec, rate: float, trials: int = 1000,
                               seed: int = 0) -> SymmetryReport:
    """Sample feasible correlation matrices and compare with the symmetric optimum.

    The objective is distance + multi-information minimized under
    multi-information <= L*R; the symmetric optimizer must not be beaten by
    more than 1e-8, and symmetrizing a sample must never increase its value.
    """
    if L > 6:
        raise ValueError("check supported for L <= 6")
    LR = L * rate
    best = symmetric_objective_minimum(rate, L, spec)
    rng = np.random.default_rng(seed)
    feasible = violations = sym_viol = 0
    worst = math.inf
    for _ in range(trials):
        c = _random_correlation(rng, L + 1)
        try:
            corr = CorrelationMatrix(c)
        except ValueError:
            continue
        info = corr.multi_information()
        if info > LR:
            continue
        feasible += 1
        val = gaussian_tuple_distance_rate(corr, spec) + info
        worst = min(worst, val - best)
        if val < best - 1e-8:
            violations += 1
        mean = float(c[np.triu_indices(L + 1, 1)].mean())
        sym_val = (gaussian_tuple_distance_rate(CorrelationMatrix.symmetric(mean, L), spec)
                   + symmetric_multi_information(mean, L))
        if sym_val > val + 1e-10:
            sym_viol += 1
    return SymmetryReport(violations == 0 and sym_viol == 0, trials, feasible, violations,
                          worst, best, sym_viol)
