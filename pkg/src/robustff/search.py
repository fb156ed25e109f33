"""Canonical forms and searches over two-level designs.

Two designs are equivalent when one becomes the other by permuting factors,
swapping the levels of some factors, and reordering runs.  The canonical
form of a design is the lexicographically smallest sorted row-code sequence
over all m! * 2^m column transforms.
"""

from __future__ import annotations

import itertools
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, lcm
from typing import Sequence

import numpy as np

from .criteria import CriterionSpec
from .design import Design, j_vector, popcount, spectrum_from_j
from .reference import hadamard_designs  # noqa: F401  (re-exported search entry point)

MAX_CANONICAL_FACTORS = 8
MAX_BITMASK_FACTORS = 6  # 2^m points must fit one uint64 word
DEFAULT_MAX_SPACE = 10 ** 6


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CanonicalForm:
    m: int
    rows: tuple[int, ...]

    def design(self) -> Design:
        return Design(self.m, self.rows)


@lru_cache(maxsize=None)
def _permuted_points(m: int) -> np.ndarray:
    """table[k, p]: image of point p under the k-th column permutation."""
    points = np.arange(1 << m)
    bits = (points[:, None] >> np.arange(m)) & 1  # (2^m, m)
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64).reshape(-1, m)
    weights = 1 << np.arange(m)
    # output bit k takes input bit perm[k]
    return (bits[:, perms] * weights).sum(axis=-1).T  # (m!, 2^m)


def _lexmin(block: np.ndarray) -> np.ndarray:
    """Lexicographically smallest row of a 2-D array."""
    order = np.lexsort(block.T[::-1])
    return block[order[0]]


def canonicalize(d: Design) -> CanonicalForm:
    if d.m > MAX_CANONICAL_FACTORS:
        raise ValueError(f"canonical forms need m <= {MAX_CANONICAL_FACTORS}, got {d.m}")
    table = _permuted_points(d.m)
    rows = np.asarray(d.rows, dtype=np.int64)
    signs = np.arange(1 << d.m, dtype=np.int64)
    best = None
    chunk = max(1, 4096 // (1 << d.m))
    for start in range(0, table.shape[0], chunk):
        permuted = table[start:start + chunk][:, rows]  # (c, n)
        images = permuted[:, None, :] ^ signs[None, :, None]  # (c, 2^m, n)
        images = np.sort(images.reshape(-1, d.n), axis=1)
        cand = _lexmin(images)
        if best is None or tuple(cand) < best:
            best = tuple(int(x) for x in cand)
    return CanonicalForm(d.m, best)


def is_canonical(d: Design) -> bool:
    return canonicalize(d).rows == tuple(sorted(d.rows))


@dataclass
class SearchConfig:
    runs: int
    factors: int
    criterion: CriterionSpec
    method: str = "exchange"  # "exchange" or "exhaustive"
    distinct_rows: bool = True
    restarts: int = 1
    seed: int = 0
    tolerance: Fraction = Fraction(0)
    max_space: int = DEFAULT_MAX_SPACE
    long_running: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.method not in ("exchange", "exhaustive"):
            raise ValueError(f"unknown search method {self.method!r}")
        if self.runs < 1 or not 1 <= self.factors <= MAX_CANONICAL_FACTORS:
            raise ValueError("need runs >= 1 and 1 <= factors <= 8")
        if self.distinct_rows and self.runs > (1 << self.factors):
            raise ValueError(f"{self.runs} distinct runs do not exist with {self.factors} factors")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        # fail early on infeasible criterion parameters
        self.criterion.coefficients(self.factors)

    def raw_space_size(self) -> int:
        points = 1 << self.factors
        if self.distinct_rows:
            return comb(points, self.runs)
        return comb(points + self.runs - 1, self.runs)


@dataclass
class SearchResult:
    criterion: str
    value: Fraction
    designs: list[Design]
    canonical_forms: list[CanonicalForm]
    visited: int
    method: str
    trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, include_time: bool = True) -> dict:
        out = {
            "criterion": self.criterion,
            "method": self.method,
            "value": {"numerator": self.value.numerator, "denominator": self.value.denominator},
            "decimal": f"{float(self.value):.6g}",
            "designs": [[list(row) for row in d.levels()] for d in self.designs],
            "canonical_forms": [list(cf.rows) for cf in self.canonical_forms],
            "visited": self.visited,
            "trace": self.trace,
        }
        if include_time:
            out["wall_time"] = round(self.wall_time, 3)
        return out


class _Scorer:
    """Integer-scaled criterion: value = score / scale, comparisons stay exact."""

    def __init__(self, spec: CriterionSpec, m: int, n: int):
        self.spec = spec
        self.m = m
        self.n = n
        coeffs = spec.coefficients(m).a
        den = lcm(*(a.denominator for a in coeffs))
        self.level_weights = [0] + [int(a * den) for a in coeffs[:m]] + [0] * max(0, m - 6)
        self.scale = den * n * n
        self.subset_weights = np.array(
            [self.level_weights[popcount(s)] for s in range(1 << m)], dtype=np.int64)

    def score(self, jv: Sequence[int]) -> int:
        spectrum = spectrum_from_j(jv, self.m, self.n)
        return sum(w * v for w, v in zip(self.level_weights, spectrum.numerators))

    def value(self, score: int) -> Fraction:
        return Fraction(int(score), self.scale)


@lru_cache(maxsize=None)
def _characters(m: int) -> np.ndarray:
    """chi[r, S] = (-1)^popcount(r & S)."""
    points = np.arange(1 << m)
    parity = np.zeros((1 << m, 1 << m), dtype=np.int64)
    anded = points[:, None] & points[None, :]
    for j in range(m):
        parity ^= (anded >> j) & 1
    return 1 - 2 * parity


def _exchange_restart(cfg: SearchConfig, restart: int) -> tuple[int, tuple[int, ...], int, int]:
    m, n = cfg.factors, cfg.runs
    scorer = _Scorer(cfg.criterion, m, n)
    chi = _characters(m)
    w = scorer.subset_weights
    tol = int(cfg.tolerance * scorer.scale) if cfg.tolerance else 0
    rng = random.Random(f"{cfg.seed}:{restart}")
    points = 1 << m
    if cfg.distinct_rows:
        rows = rng.sample(range(points), n)
    else:
        rows = [rng.randrange(points) for _ in range(n)]
    rows_arr = np.array(rows, dtype=np.int64)
    jv = chi[rows_arr].sum(axis=0)
    current = int((jv * jv * w).sum())
    visited = 1
    steps = 0
    while True:
        if cfg.distinct_rows:
            inside = set(rows_arr.tolist())
            cand = np.array([p for p in range(points) if p not in inside], dtype=np.int64)
        else:
            cand = np.arange(points, dtype=np.int64)
        if cand.size == 0:
            break
        delta = chi[cand][None, :, :] - chi[rows_arr][:, None, :]  # (n, c, 2^m)
        newj = jv[None, None, :] + delta
        vals = (newj * newj * w).sum(axis=-1)
        if not cfg.distinct_rows:
            vals = np.where(cand[None, :] == rows_arr[:, None], np.iinfo(np.int64).max, vals)
        visited += vals.size
        flat = int(np.argmin(vals))
        best = int(vals.flat[flat])
        if not best < current - tol:
            break
        i, c = divmod(flat, cand.size)
        jv = newj[i, c].copy()
        rows_arr[i] = cand[c]
        current = best
        steps += 1
        recomputed = j_vector(Design(m, tuple(int(r) for r in rows_arr)))
        if tuple(int(v) for v in jv) != recomputed:
            raise RuntimeError("incremental j-vector update diverged from recomputation")
    return current, tuple(sorted(int(r) for r in rows_arr)), visited, steps


def _exchange_batch(cfg: SearchConfig, restarts: Sequence[int]) -> list[tuple[int, tuple[int, ...], int, int]]:
    return [_exchange_restart(cfg, r) for r in restarts]


def _resolve_workers(workers: int) -> int:
    if workers and workers > 0:
        return workers
    return int(os.environ.get("ROBUSTFF_WORKERS", "1") or 1)


def exchange_search(cfg: SearchConfig) -> SearchResult:
    """Row-exchange search from random starts with strict exact improvement.

    Each pass scores every (run in design, point out of design) swap and
    takes the best one; a restart ends when no swap improves by more than
    ``cfg.tolerance``.  Restart ``r`` is seeded from ``(cfg.seed, r)`` so the
    outcome does not depend on how restarts are spread over workers.
    """
    started = time.perf_counter()
    scorer = _Scorer(cfg.criterion, cfg.factors, cfg.runs)
    workers = _resolve_workers(cfg.workers)
    indices = list(range(cfg.restarts))
    if workers > 1 and cfg.restarts > 1:
        batches = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_exchange_batch, [cfg] * len(batches), batches))
        by_index = {}
        for batch, part in zip(batches, parts):
            by_index.update(zip(batch, part))
        outcomes = [by_index[r] for r in indices]
    else:
        outcomes = _exchange_batch(cfg, indices)

    best = min(score for score, *_ in outcomes)
    winners = sorted({rows for score, rows, *_ in outcomes if score == best})
    forms = sorted({canonicalize(Design(cfg.factors, rows)) for rows in winners}, key=lambda cf: cf.rows)
    trace = [{"restart": r, "value": str(scorer.value(score)), "steps": steps}
             for r, (score, _, _, steps) in enumerate(outcomes)]
    return SearchResult(
        criterion=str(cfg.criterion),
        value=scorer.value(best),
        designs=[cf.design() for cf in forms],
        canonical_forms=forms,
        visited=sum(v for _, _, v, _ in outcomes),
        method="exchange",
        trace=trace,
        wall_time=time.perf_counter() - started,
    )


@lru_cache(maxsize=None)
def _group_point_weights(m: int) -> np.ndarray:
    """W[g, p] = 2^(2^m - 1 - image of p under g), one row per group element.

    For sets of equal size, a lexicographically smaller sorted sequence has a
    larger weight sum, so a set is canonical iff no group element raises it.
    """
    perms = _permuted_points(m)
    signs = np.arange(1 << m, dtype=np.int64)
    images = (perms[:, None, :] ^ signs[None, :, None]).reshape(-1, 1 << m)
    top = (1 << m) - 1
    return np.left_shift(np.uint64(1), (top - images).astype(np.uint64))


def _orderly_sets(m: int, n: int, trace: list[int]):
    """Yield every canonical n-subset of {0..2^m-1}, one per equivalence class."""
    W = _group_point_weights(m)
    points = 1 << m
    top = points - 1
    acc0 = np.zeros(W.shape[0], dtype=np.uint64)

    def extend(rows: list[int], acc: np.ndarray, own: int):
        k = len(rows)
        trace[k] += 1
        if k == n:
            yield tuple(rows)
            return
        start = rows[-1] + 1 if rows else 0
        for p in range(start, points - (n - k - 1)):
            child = acc + W[:, p]
            child_own = own | (1 << (top - p))
            if int(child.max()) > child_own:
                continue
            rows.append(p)
            yield from extend(rows, child, child_own)
            rows.pop()

    yield from extend([], acc0, 0)


def _orderly_multisets(m: int, n: int, distinct: bool, trace: list[int]):
    """Generic orderly generation through full canonicalization (small cases)."""
    points = 1 << m

    def extend(rows: list[int]):
        k = len(rows)
        trace[k] += 1
        if k == n:
            yield tuple(rows)
            return
        if rows:
            start = rows[-1] + 1 if distinct else rows[-1]
        else:
            start = 0
        for p in range(start, points):
            rows.append(p)
            if canonicalize(Design(m, tuple(rows))).rows == tuple(rows):
                yield from extend(rows)
            rows.pop()

    yield from extend([])


def exhaustive_search(cfg: SearchConfig) -> SearchResult:
    """Visit one design per equivalence class and keep every class at the minimum.

    Classes are generated orderly: a sorted row sequence is extended only
    by larger rows, and only canonical prefixes are kept, which reaches
    each canonical design exactly once.
    """
    size = cfg.raw_space_size()
    if size > cfg.max_space and not cfg.long_running:
        raise SearchSpaceTooLarge(
            f"raw design space has {size} members (bound {cfg.max_space}); "
            f"roughly {size // (factorial(cfg.factors) << cfg.factors) + 1} classes; "
            "pass the long-running flag to enumerate anyway")
    started = time.perf_counter()
    m, n = cfg.factors, cfg.runs
    scorer = _Scorer(cfg.criterion, m, n)
    level_counts = [0] * (n + 1)
    if cfg.distinct_rows and m <= MAX_BITMASK_FACTORS:
        sets = _orderly_sets(m, n, level_counts)
    else:
        sets = _orderly_multisets(m, n, cfg.distinct_rows, level_counts)

    best = None
    winners: list[tuple[int, ...]] = []
    leaves = 0
    for rows in sets:
        leaves += 1
        score = scorer.score(j_vector(Design(m, rows)))
        if best is None or score < best:
            best, winners = score, [rows]
        elif score == best:
            winners.append(rows)
    forms = [CanonicalForm(m, rows) for rows in winners]
    return SearchResult(
        criterion=str(cfg.criterion),
        value=scorer.value(best),
        designs=[cf.design() for cf in forms],
        canonical_forms=forms,
        visited=leaves,
        method="exhaustive",
        trace=[{"runs": k, "canonical_prefixes": c} for k, c in enumerate(level_counts)],
        wall_time=time.perf_counter() - started,
    )


def run_search(cfg: SearchConfig) -> SearchResult:
    if cfg.method == "exhaustive":
        return exhaustive_search(cfg)
    return exchange_search(cfg)
