"""Exponents of the moments of the exceeder count N(x0, y).

N counts the incorrect codewords scoring at least as high as the transmitted
one; the number of guesses until the transmitted codeword is found is N + 1.
Both functions return the signed exponent ``e`` in ``E[N^rho] ~ exp(n e)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .channel import Dmc
from .gallager import (
    e0_optimized,
    random_coding_solution,
    sphere_packing_solution,
)

RHO_MAX = 1e3


@dataclass(frozen=True)
class GuessingQuery:
    rho: float
    rate: float
    w: Dmc

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("moment order rho must be positive")
        if not self.rate > 0:
            raise ValueError("rate must be positive")


@dataclass(frozen=True)
class GuessingExponent:
    value: float
    threshold: float
    branch: str
    conjecture: bool = False


@lru_cache(maxsize=256)
def _e0_star(rho: float, w: Dmc) -> float:
    return e0_optimized(rho, w)[0]


@lru_cache(maxsize=256)
def _sp(rate: float, w: Dmc):
    return sphere_packing_solution(rate, w)


@lru_cache(maxsize=256)
def _rc(rate: float, w: Dmc):
    return random_coding_solution(rate, 1, w)


def capacity(w: Dmc) -> float:
    # E0'(0, Q) = I(Q;W), maximized by the same simplex routine
    from .channel import mutual_information
    from .optimize import maximize_on_simplex

    _, c, _ = maximize_on_simplex(lambda q: mutual_information(q, w.matrix), w.input_size)
    return c


def sp_rho_achiever(rate: float, w: Dmc) -> float:
    """The rho attaining the sphere-packing exponent at ``rate`` (Q optimized)."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    sol = _sp(float(rate), w)
    if sol.extra and sol.extra.get("divergent"):
        raise ArithmeticError(f"sphere-packing exponent diverges at R={rate}")
    if sol.value == 0.0:
        return 0.0
    return float(sol.rho)


def _tail(rho: float, rate: float, w: Dmc) -> float:
    return rho * rate - _e0_star(float(rho), w)


def guessing_moment_lower_exponent(query: GuessingQuery) -> GuessingExponent:
    """Lower bound on the exponent of E[N^rho]."""
    thr = sp_rho_achiever(query.rate, query.w)
    if query.rho <= thr:
        return GuessingExponent(-_sp(float(query.rate), query.w).value, thr, "sphere-packing")
    return GuessingExponent(_tail(query.rho, query.rate, query.w), thr, "gallager")


def conjectured_threshold(rate: float, w: Dmc, tol: float = 1e-12) -> float:
    """Right-hand root of E0*(rho) - rho R = E_r(R), by bisection on [rho_sp, RHO_MAX].

    On [0, RHO_MAX] the residual has two roots below the critical rate (it
    peaks at the sphere-packing achiever); the one at or beyond the achiever
    is the one that keeps the conjectured formula above the lower bound.
    """
    er = _rc(float(rate), w).value
    lo = sp_rho_achiever(rate, w)
    hi = RHO_MAX
    g = lambda r: (_e0_star(float(r), w) - r * rate if r > 0 else 0.0) - er  # noqa: E731
    if g(lo) <= 0:
        return lo
    if g(hi) > 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def guessing_moment_conjectured_exponent(query: GuessingQuery) -> GuessingExponent:
    """Conjectured achievable exponent of E[N^rho]; always flagged as a conjecture."""
    thr = conjectured_threshold(query.rate, query.w)
    if query.rho <= thr:
        return GuessingExponent(-_rc(float(query.rate), query.w).value, thr, "random-coding",
                                conjecture=True)
    return GuessingExponent(_tail(query.rho, query.rate, query.w), thr, "gallager",
                            conjecture=True)


def conjectured_residual(rate: float, w: Dmc) -> float:
    thr = conjectured_threshold(rate, w)
    return abs(_rc(float(rate), w).value - (_e0_star(float(thr), w) - thr * rate))


def lower_exponent_value(rho: float, rate: float, w: Dmc) -> float:
    return guessing_moment_lower_exponent(GuessingQuery(rho, rate, w)).value


def exponent_sign_change(rate: float, w: Dmc, hi: float = RHO_MAX) -> float:
    """Moment order at which the lower exponent crosses zero (E0*(rho) = rho R)."""
    lo = sp_rho_achiever(rate, w)
    if _tail(hi, rate, w) <= 0:
        return math.inf
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if _tail(mid, rate, w) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
