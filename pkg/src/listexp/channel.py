"""Probability primitives for discrete memoryless channels.

Every information quantity here is in nats.  The conventions ``0 ln 0 = 0``
and ``a ln(a/0) = +inf`` (for ``a > 0``) are used throughout; an infinite
divergence is reported as ``math.inf`` rather than raised.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import entr, rel_entr

NORMALIZATION_TOL = 1e-9


class ChannelError(ValueError):
    """Invalid channel, distribution or dimension mismatch."""


def _as_stochastic_rows(matrix, name: str = "matrix") -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.ndim != 2:
        raise ChannelError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ChannelError(f"{name} has non-finite entries")
    if np.any(a < 0) or np.any(a > 1):
        raise ChannelError(f"{name} entries must lie in [0, 1]")
    sums = a.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
        raise ChannelError(f"{name} rows must sum to 1 (got {sums})")
    return a / sums[:, None]


@dataclass(frozen=True, eq=False)
class Dmc:
    """Row-stochastic transition matrix ``P(y|x)``.

    Rows are validated to within 1e-9 and then renormalized.  The same class
    doubles as a test channel (a conditional distribution being optimized).
    """

    matrix: np.ndarray

    def __post_init__(self):
        a = _as_stochastic_rows(self.matrix)
        if a.shape[0] < 2 or a.shape[1] < 2:
            raise ChannelError("channel needs at least two inputs and two outputs")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self) -> np.ndarray:
        return self.matrix

    def __eq__(self, other):
        return isinstance(other, Dmc) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def fingerprint(self) -> str:
        """Short stable hash of the matrix, used to tag emitted curves."""
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.matrix).tobytes()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "input_size": self.input_size,
            "output_size": self.output_size,
            "matrix": self.matrix.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Dmc":
        try:
            k, m, rows = data["input_size"], data["output_size"], data["matrix"]
        except (KeyError, TypeError) as exc:
            raise ChannelError(f"channel file is missing field {exc}") from None
        ch = cls(np.asarray(rows, dtype=float))
        if ch.input_size != k or ch.output_size != m:
            raise ChannelError(
                f"declared size {k}x{m} does not match matrix {ch.input_size}x{ch.output_size}"
            )
        return ch


# A test channel obeys the same invariants; it may be degenerate in size only
# through the channel it is paired with.
ConditionalChannel = Dmc


def load_channel(path: str | Path) -> Dmc:
    with open(path) as fh:
        return Dmc.from_json(json.load(fh))


def bsc(p: float) -> Dmc:
    return Dmc(np.array([[1 - p, p], [p, 1 - p]]))


def bec(e: float) -> Dmc:
    return Dmc(np.array([[1 - e, e, 0.0], [0.0, e, 1 - e]]))


def noiseless(k: int = 2) -> Dmc:
    return Dmc(np.eye(k))


def _rows(w) -> np.ndarray:
    return w.matrix if isinstance(w, Dmc) else np.asarray(w, dtype=float)


def as_distribution(q, size: int | None = None) -> np.ndarray:
    """Validate an input distribution and return a renormalized copy."""
    p = np.array(q, dtype=float).ravel()
    if size is not None and p.size != size:
        raise ChannelError(f"distribution has {p.size} entries, expected {size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ChannelError("distribution entries must be finite and nonnegative")
    s = p.sum()
    if abs(s - 1.0) > NORMALIZATION_TOL:
        raise ChannelError(f"distribution sums to {s}, not 1")
    return p / s


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def entropy(p) -> float:
    return float(entr(np.asarray(p, dtype=float)).sum())


def kl_divergence(p, q) -> float:
    return float(rel_entr(np.asarray(p, dtype=float), np.asarray(q, dtype=float)).sum())


def binary_divergence(a: float, b: float) -> float:
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError(f"binary divergence arguments must lie in [0,1], got {a}, {b}")
    return float(rel_entr(a, b) + rel_entr(1.0 - a, 1.0 - b))


def _check_pair(q: np.ndarray, w: np.ndarray):
    if w.ndim != 2 or q.shape != (w.shape[0],):
        raise ChannelError(f"distribution of length {q.size} does not match channel {w.shape}")


def joint_mutual_information(joint) -> np.ndarray | float:
    """Mutual information of joint pmf(s) over the last two axes.

    Accepts unnormalized count tables as well; each table is normalized by its
    own total.  This is the single code path for both the probabilistic and
    the empirical mutual information.
    """
    j = np.asarray(joint, dtype=float)
    j = j / j.sum(axis=(-2, -1), keepdims=True)
    px = j.sum(axis=-1, keepdims=True)
    py = j.sum(axis=-2, keepdims=True)
    mi = rel_entr(j, px * py).sum(axis=(-2, -1))
    mi = np.maximum(mi, 0.0)
    return float(mi) if mi.ndim == 0 else mi


def mutual_information(q, w) -> float:
    q = np.asarray(q, dtype=float)
    w = _rows(w)
    _check_pair(q, w)
    return joint_mutual_information(q[:, None] * w)


def conditional_divergence(pt, w, q) -> float:
    """``D(pt || w | q) = sum_x q(x) KL(pt(.|x) || w(.|x))``; ``inf`` off-support."""
    pt, w = _rows(pt), _rows(w)
    q = np.asarray(q, dtype=float)
    _check_pair(q, w)
    if pt.shape != w.shape:
        raise ChannelError(f"test channel shape {pt.shape} differs from channel {w.shape}")
    per_row = rel_entr(pt, w).sum(axis=1)
    active = q > 0
    if np.any(np.isinf(per_row[active])):
        return math.inf
    return float(max(0.0, np.dot(q[active], per_row[active])))


def output_distribution(q, w) -> np.ndarray:
    return np.asarray(q, dtype=float) @ _rows(w)


@dataclass(frozen=True, eq=False)
class TupleJoint:
    """Joint pmf of ``(X_0, ..., X_L)`` stored as an (L+1)-dimensional tensor."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim < 2:
            raise ChannelError("a tuple joint needs at least two coordinates")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ChannelError("tuple joint entries must be finite and nonnegative")
        s = t.sum()
        if abs(s - 1.0) > NORMALIZATION_TOL:
            raise ChannelError(f"tuple joint has total mass {s}")
        object.__setattr__(self, "table", t / s)

    @property
    def order(self) -> int:
        return self.table.ndim

    def marginal(self, i: int) -> np.ndarray:
        axes = tuple(a for a in range(self.table.ndim) if a != i)
        return self.table.sum(axis=axes)

    def marginals(self) -> list[np.ndarray]:
        return [self.marginal(i) for i in range(self.order)]


def _table(pj) -> np.ndarray:
    return pj.table if isinstance(pj, TupleJoint) else np.asarray(pj, dtype=float)


def multi_information(pj) -> float:
    """Sum of marginal entropies minus the joint entropy."""
    t = _table(pj)
    marg = [t.sum(axis=tuple(a for a in range(t.ndim) if a != i)) for i in range(t.ndim)]
    val = sum(entropy(m) for m in marg) - entropy(t)
    return max(0.0, float(val))


def multi_information_kl(pj) -> float:
    """Same quantity computed as KL(joint || product of marginals)."""
    t = _table(pj)
    prod = np.ones(())
    for i in range(t.ndim):
        m = t.sum(axis=tuple(a for a in range(t.ndim) if a != i))
        prod = np.multiply.outer(prod, m)
    return max(0.0, kl_divergence(t, prod))


@dataclass(frozen=True)
class JointType:
    """Integer count table of a pair (or tuple) of sequences of length ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        c = np.asarray(self.counts)
        if np.any(c < 0) or int(c.sum()) != self.n:
            raise ChannelError("joint type counts must be nonnegative and sum to n")

    def normalized(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


def empirical_joint_type(x: Sequence[int], y: Sequence[int], x_size: int | None = None,
                         y_size: int | None = None) -> JointType:
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ChannelError("sequences must be one-dimensional, nonempty and of equal length")
    kx = int(x.max()) + 1 if x_size is None else x_size
    ky = int(y.max()) + 1 if y_size is None else y_size
    counts = np.zeros((kx, ky), dtype=np.int64)
    np.add.at(counts, (x, y), 1)
    return JointType(counts, x.size)


def empirical_mutual_information(jt: JointType) -> float:
    return joint_mutual_information(jt.counts)


def composition_counts(q, n: int) -> np.ndarray:
    """Round ``n*q`` to integers summing to ``n`` by largest remainder."""
    q = np.asarray(q, dtype=float)
    raw = n * q
    base = np.floor(raw + 1e-12).astype(np.int64)
    short = n - int(base.sum())
    if short > 0:
        frac = raw - base
        order = np.lexsort((np.arange(q.size), -frac))
        base[order[:short]] += 1
    return base
