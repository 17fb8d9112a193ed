"""Monte-Carlo and exhaustive evaluation of list decoding over fixed-composition codes.

Each trial draws a fresh codebook of ``M = ceil(e^{nR}) + 1`` codewords from
one type class, transmits message 0, samples the channel output and scores
every codeword, either by likelihood (ML) or by empirical mutual information
(MMI).  Scores are computed from joint-type count tables and rounded to 9
decimals so that equal types give exactly equal scores.

Tie rules
---------
* The list decoder ranks by score and then by codeword index, so the
  transmitted message 0 wins every tie; an error occurs iff at least ``L``
  competitors score strictly higher.
* The exceeder count ``N`` counts competitors scoring at least as high as the
  transmitted codeword.  The guessing order puts the transmitted codeword
  after all codewords tied with it, which makes the guess count ``N + 1``.

Engines
-------
``direct`` materializes codebooks.  ``typed`` samples the same per-trial
outcome distribution without materializing them: given the transmitted
codeword's joint type with ``y``, each competitor independently lands in a
joint type with a hypergeometric probability, so the numbers of strictly
better and tied competitors are binomial.
"""
from __future__ import annotations

import itertools
import math
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .channel import Dmc, as_distribution, composition_counts, joint_mutual_information

SCORE_DECIMALS = 9
WORKERS_ENV = "LISTEXP_WORKERS"
TYPED_BLOCK = 1 << 15
DIRECT_BUDGET = 1 << 22  # codeword symbols materialized per block
MAX_TABLES = 200_000
DIRECT_MAX_M = 16


def codebook_size(n: int, rate: float) -> int:
    """M = ceil(e^{nR}) + 1, with a small guard against e^{nR} landing just above an integer."""
    return math.ceil(math.exp(n * rate) - 1e-9) + 1


@dataclass(frozen=True, eq=False)
class SimConfig:
    n: int
    rate: float
    q: np.ndarray
    w: Dmc
    list_size: int | None = None
    list_exponent: float | None = None
    decoder: str = "ml"
    trials: int = 10_000
    master_seed: int = 0
    engine: str = "auto"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be positive")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if (self.list_size is None) == (self.list_exponent is None):
            raise ValueError("give exactly one of list_size and list_exponent")
        if self.decoder not in ("ml", "mmi"):
            raise ValueError("decoder must be 'ml' or 'mmi'")
        if self.engine not in ("auto", "direct", "typed"):
            raise ValueError("engine must be 'auto', 'direct' or 'typed'")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "q", as_distribution(self.q, self.w.input_size))
        if self.list_exponent is not None and self.list_exponent <= 0:
            raise ValueError("list exponent must be positive")
        if not 1 <= self.L <= self.M - 1:
            raise ValueError(f"list size {self.L} outside [1, M-1] with M={self.M}")

    @property
    def M(self) -> int:
        return codebook_size(self.n, self.rate)

    @property
    def L(self) -> int:
        if self.list_size is not None:
            return int(self.list_size)
        return math.ceil(math.exp(self.list_exponent * self.n) - 1e-9)

    @property
    def effective_rate(self) -> float:
        return math.log(self.M - 1) / self.n

    @property
    def composition(self) -> np.ndarray:
        return composition_counts(self.q, self.n)

    @property
    def resolved_engine(self) -> str:
        if self.engine != "auto":
            return self.engine
        return "direct" if self.M <= DIRECT_MAX_M else "typed"

    @property
    def block_size(self) -> int:
        if self.resolved_engine == "typed":
            return TYPED_BLOCK
        return max(1, min(TYPED_BLOCK, DIRECT_BUDGET // (self.M * self.n)))

    def echo(self) -> dict:
        return {
            "n": self.n,
            "rate_nats": self.rate,
            "effective_rate_nats": self.effective_rate,
            "M": self.M,
            "L": self.L,
            "list_mode": "fixed" if self.list_size is not None else "exponential",
            "list_exponent": self.list_exponent,
            "q": self.q.tolist(),
            "composition": self.composition.tolist(),
            "channel": self.w.to_json(),
            "decoder": self.decoder,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "engine": self.resolved_engine,
        }


@dataclass
class SimResult:
    error_count: int
    trials: int
    estimate: float
    ci_half_width: float
    histogram: list[tuple[int, int]]
    moments: dict[float, float] = field(default_factory=dict)
    guess_moments: dict[float, float] = field(default_factory=dict)
    guess_mismatches: int = 0
    config: dict = field(default_factory=dict)

    def exponent(self, n: int) -> float:
        return -math.log(self.estimate) / n if self.estimate > 0 else math.inf

    def to_json(self) -> dict:
        return {
            "error_count": self.error_count,
            "trials": self.trials,
            "estimate": self.estimate,
            "ci95_half_width": self.ci_half_width,
            "histogram": [[int(v), int(c)] for v, c in self.histogram],
            "moments": [{"rho": r, "log_moment_rate": _finite(v)} for r, v in self.moments.items()],
            "guess_moments": [{"rho": r, "log_moment_rate": _finite(v)}
                              for r, v in self.guess_moments.items()],
            "guess_mismatches": self.guess_mismatches,
            "config": self.config,
        }


def _finite(v: float):
    return v if math.isfinite(v) else None


# --- scores -------------------------------------------------------------------

def _log_w(w: Dmc) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w.matrix)


def ml_scores(counts: np.ndarray, w: Dmc) -> np.ndarray:
    """Log-likelihood from joint-type counts (..., |X|, |Y|), with 0 * ln 0 = 0."""
    lw = _log_w(w)
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * lw, 0.0)
    return np.round(terms.sum(axis=(-2, -1)), SCORE_DECIMALS)


def mmi_scores(counts: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(joint_mutual_information(counts)), SCORE_DECIMALS)


def _scores(counts: np.ndarray, decoder: str, w: Dmc | None) -> np.ndarray:
    if decoder == "ml":
        return ml_scores(counts, w)
    return mmi_scores(counts)


def joint_counts(codebook: np.ndarray, y: np.ndarray, x_size: int, y_size: int) -> np.ndarray:
    """Joint-type count tables of every codeword against ``y``; leading axes are kept."""
    cb = np.asarray(codebook, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    idx = cb * y_size + np.broadcast_to(y[..., None, :] if y.ndim == cb.ndim - 1 else y, cb.shape)
    lead = idx.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    cells = x_size * y_size
    flat = idx.reshape(rows, -1) + (np.arange(rows) * cells)[:, None]
    counts = np.bincount(flat.ravel(), minlength=rows * cells)
    return counts.reshape(*lead, x_size, y_size)


def _rank(scores: np.ndarray) -> np.ndarray:
    m = scores.shape[-1]
    return np.lexsort((np.arange(m), -scores))


def ml_list_decode(codebook, y, L: int, w: Dmc) -> np.ndarray:
    """Indices of the L most likely codewords; ties go to the smaller index."""
    cb = np.asarray(codebook)
    if not 1 <= L <= cb.shape[0]:
        raise ValueError("list size must be between 1 and the number of codewords")
    counts = joint_counts(cb, y, w.input_size, w.output_size)
    return _rank(ml_scores(counts, w))[:L]


def mmi_list_decode(codebook, y, L: int, x_size: int | None = None,
                    y_size: int | None = None) -> np.ndarray:
    """Indices of the L codewords with the largest empirical mutual information with y."""
    cb = np.asarray(codebook)
    y = np.asarray(y)
    if not 1 <= L <= cb.shape[0]:
        raise ValueError("list size must be between 1 and the number of codewords")
    kx = int(cb.max()) + 1 if x_size is None else x_size
    ky = int(y.max()) + 1 if y_size is None else y_size
    counts = joint_counts(cb, y, max(kx, 1), max(ky, 1))
    return _rank(mmi_scores(counts))[:L]


# --- codebooks ------------------------------------------------------------------

def _base_sequence(comp: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(comp.size), comp).astype(np.int64)


def generate_fixed_composition_code(n: int, M: int, q, seed) -> np.ndarray:
    """M independent uniform draws from the type class of the rounded composition."""
    q = as_distribution(q)
    comp = composition_counts(q, n)
    if np.count_nonzero(comp) == 1:
        warnings.warn("composition has a single symbol; all codewords are identical",
                      stacklevel=2)
    rng = np.random.default_rng(seed)
    base = np.broadcast_to(_base_sequence(comp), (M, n)).copy()
    return rng.permuted(base, axis=1)


def _sample_outputs(rng: np.random.Generator, x: np.ndarray, w: Dmc) -> np.ndarray:
    cdf = np.cumsum(w.matrix, axis=1)
    u = rng.random(x.shape)
    y = (u[..., None] >= cdf[x]).sum(axis=-1)
    return np.minimum(y, w.output_size - 1)


# --- trial engines ------------------------------------------------------------------

@dataclass
class _BlockOutcome:
    errors: int
    hist: Counter
    mismatches: int


def _direct_block(cfg: SimConfig, rng: np.random.Generator, size: int) -> _BlockOutcome:
    n, M, w = cfg.n, cfg.M, cfg.w
    base = np.broadcast_to(_base_sequence(cfg.composition), (size, M, n)).copy()
    books = rng.permuted(base, axis=-1)
    y = _sample_outputs(rng, books[:, 0, :], w)
    counts = joint_counts(books, y[:, None, :], w.input_size, w.output_size)
    s = _scores(counts, cfg.decoder, w)
    s0 = s[:, :1]
    n_gt = (s[:, 1:] > s0).sum(axis=1)
    n_ge = (s[:, 1:] >= s0).sum(axis=1)
    errors = int((n_gt >= cfg.L).sum())
    # guessing order: score descending, transmitted codeword after its ties
    tx_last = np.zeros((size, M), dtype=np.int64)
    tx_last[:, 0] = 1
    order = np.lexsort((np.broadcast_to(np.arange(M), (size, M)), tx_last, -s), axis=-1)
    guesses = np.argmax(order == 0, axis=1) + 1
    mismatches = int((guesses != n_ge + 1).sum())
    return _BlockOutcome(errors, Counter(n_ge.tolist()), mismatches)


def _margin_tables(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """All nonnegative integer matrices with the given row and column sums."""
    k, m = rows.size, cols.size
    out = []

    def row_choices(total, caps):
        if caps.size == 1:
            if total <= caps[0]:
                yield [total]
            return
        for first in range(min(total, caps[0]) + 1):
            rest = total - first
            if rest > caps[1:].sum():
                continue
            for tail in row_choices(rest, caps[1:]):
                yield [first] + tail

    def rec(a, remaining, acc):
        if a == k - 1:
            out.append(acc + [remaining.tolist()])
            if len(out) > MAX_TABLES:
                raise ValueError("too many joint types for the typed engine; use engine='direct'")
            return
        for r in row_choices(int(rows[a]), remaining):
            rec(a + 1, remaining - np.array(r), acc + [r])

    rec(0, cols.astype(np.int64), [])
    return np.array(out, dtype=np.int64).reshape(-1, k, m)


class _CompetitorLaw:
    """Score distribution of one uniform type-class codeword against a fixed output type."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.comp = cfg.composition
        self.cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def law(self, ytype: tuple) -> tuple[np.ndarray, np.ndarray]:
        if ytype not in self.cache:
            cols = np.array(ytype, dtype=np.int64)
            tables = _margin_tables(self.comp, cols)
            n = self.cfg.n
            logp = (gammaln(self.comp + 1).sum() + gammaln(cols + 1).sum() - gammaln(n + 1)
                    - gammaln(tables + 1).sum(axis=(1, 2)))
            p = np.exp(logp)
            p /= p.sum()
            scores = _scores(tables, self.cfg.decoder, self.cfg.w)
            vals, inv = np.unique(scores, return_inverse=True)
            mass = np.bincount(inv.ravel(), weights=p, minlength=vals.size)
            # tail[i] = P(score >= vals[i]); tail[-1] = 0
            tail = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]])
            self.cache[ytype] = (vals, np.minimum(tail, 1.0))
        return self.cache[ytype]


def _typed_block(cfg: SimConfig, rng: np.random.Generator, size: int,
                 law: _CompetitorLaw) -> _BlockOutcome:
    w = cfg.w
    comp = cfg.composition
    k0 = np.zeros((size, w.input_size, w.output_size), dtype=np.int64)
    for a in range(w.input_size):
        if comp[a]:
            k0[:, a, :] = rng.multinomial(comp[a], w.matrix[a], size=size)
    s0 = _scores(k0, cfg.decoder, w)
    ytypes = k0.sum(axis=1)
    uniq, inv = np.unique(ytypes, axis=0, return_inverse=True)
    inv = inv.ravel()
    q_gt = np.empty(size)
    q_eq = np.empty(size)
    for j, yt in enumerate(map(tuple, uniq.tolist())):
        vals, tail = law.law(yt)
        sel = inv == j
        right = np.searchsorted(vals, s0[sel], side="right")
        left = np.searchsorted(vals, s0[sel], side="left")
        q_gt[sel] = tail[right]
        q_eq[sel] = tail[left] - tail[right]
    others = cfg.M - 1
    n_gt = rng.binomial(others, np.clip(q_gt, 0.0, 1.0))
    rest = np.where(q_gt < 1.0, q_eq / np.where(q_gt < 1.0, 1.0 - q_gt, 1.0), 0.0)
    n_eq = rng.binomial(others - n_gt, np.clip(rest, 0.0, 1.0))
    n_ge = n_gt + n_eq
    errors = int((n_gt >= cfg.L).sum())
    return _BlockOutcome(errors, Counter(n_ge.tolist()), 0)


def _block_rng(master_seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _run_blocks(cfg: SimConfig, blocks: list[int]) -> list[_BlockOutcome]:
    B = cfg.block_size
    law = _CompetitorLaw(cfg) if cfg.resolved_engine == "typed" else None
    out = []
    for b in blocks:
        size = min(B, cfg.trials - b * B)
        rng = _block_rng(cfg.master_seed, b)
        if law is None:
            out.append(_direct_block(cfg, rng, size))
        else:
            out.append(_typed_block(cfg, rng, size, law))
    return out


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _simulate(cfg: SimConfig, rhos, workers: int | None) -> SimResult:
    workers = default_workers() if workers is None else max(1, workers)
    nblocks = -(-cfg.trials // cfg.block_size)
    blocks = list(range(nblocks))
    if workers == 1 or nblocks == 1:
        outcomes = _run_blocks(cfg, blocks)
    else:
        chunks = [blocks[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_blocks, [cfg] * len(chunks), chunks))
        by_block = {}
        for chunk, part in zip(chunks, parts):
            by_block.update(zip(chunk, part))
        outcomes = [by_block[b] for b in blocks]
    errors = sum(o.errors for o in outcomes)
    hist: Counter = Counter()
    for o in outcomes:
        hist.update(o.hist)
    T = cfg.trials
    p = errors / T
    half = 1.96 * math.sqrt(p * (1 - p) / T)
    histogram = sorted(hist.items())
    moments, guess = {}, {}
    for r in rhos or []:
        r = float(r)
        moments[r] = _log_moment_rate(histogram, r, T, cfg.n, shift=0)
        guess[r] = _log_moment_rate(histogram, r, T, cfg.n, shift=1)
    return SimResult(errors, T, p, half, histogram, moments, guess,
                     sum(o.mismatches for o in outcomes), cfg.echo())


def _log_moment_rate(histogram, rho: float, trials: int, n: int, shift: int) -> float:
    vals = np.array([v + shift for v, _ in histogram], dtype=float)
    cnt = np.array([c for _, c in histogram], dtype=float)
    keep = vals > 0  # N^rho is taken as 0 when N = 0
    if not np.any(keep):
        return -math.inf
    lm = np.log(cnt[keep]) + rho * np.log(vals[keep])
    top = lm.max()
    return float((top + math.log(np.exp(lm - top).sum()) - math.log(trials)) / n)


def estimate_list_error(config: SimConfig, workers: int | None = None) -> SimResult:
    """Monte-Carlo list-error probability with a normal-approximation 95% interval."""
    return _simulate(config, [], workers)


def exceeder_statistics(config: SimConfig, rho_list, workers: int | None = None) -> SimResult:
    """Exceeder-count histogram plus (1/n) ln of the empirical moments of N and N+1."""
    return _simulate(config, list(rho_list), workers)


# --- exhaustive oracle --------------------------------------------------------------

ORACLE_MAX_N = 6
ORACLE_MAX_M = 4


def type_class(comp: np.ndarray) -> np.ndarray:
    """All sequences with the given symbol counts, in lexicographic order."""
    seqs = sorted(set(itertools.permutations(_base_sequence(comp).tolist())))
    return np.array(seqs, dtype=np.int64)


def exhaustive_list_error(n: int, M: int, L: int, q, w: Dmc, decoder: str = "ml") -> float:
    """Exact ensemble-average list-error probability by full enumeration.

    Every ordered M-tuple of type-class members is weighted equally and every
    output sequence by its channel probability given codeword 0.
    """
    if n > ORACLE_MAX_N or M > ORACLE_MAX_M:
        raise ValueError(f"exhaustive oracle supports n <= {ORACLE_MAX_N}, M <= {ORACLE_MAX_M}")
    if not 1 <= L <= M:
        raise ValueError("list size must be between 1 and M")
    q = as_distribution(q, w.input_size)
    T = type_class(composition_counts(q, n))
    ys = np.array(list(itertools.product(range(w.output_size), repeat=n)), dtype=np.int64)
    counts = joint_counts(np.broadcast_to(T[None], (ys.shape[0],) + T.shape), ys[:, None, :],
                          w.input_size, w.output_size)
    S = _scores(counts, decoder, w)  # (ny, |T|)
    lw = _log_w(w)
    with np.errstate(invalid="ignore"):
        logp = lw[T[None, :, :], ys[:, None, :]].sum(axis=-1)  # (ny, |T|)
    py = np.exp(logp)
    tuples = np.array(list(itertools.product(range(T.shape[0]), repeat=M)), dtype=np.int64)
    total = 0.0
    idx = np.broadcast_to(np.arange(M), tuples.shape)
    for j in range(ys.shape[0]):
        s = S[j][tuples]
        order = np.lexsort((idx, -s), axis=-1)
        err = ~np.any(order[:, :L] == 0, axis=1)
        total += float(np.dot(py[j][tuples[:, 0]], err))
    return total / tuples.shape[0]
