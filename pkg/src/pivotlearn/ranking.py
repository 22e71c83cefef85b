"""Permutations over a pool, pairwise-preference estimators, and ranking ERM.

The estimator builder keeps every pair whose positions under the pivot are
closer than p, then stratifies the remaining pairs into geometric distance
bands and samples p pairs per band with repetition, weighting each draw by
band size over p.  Bands no larger than p are taken whole at unit weight, so
for p >= n the estimator degenerates to the exact regret.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Insertion, Params, PoolMismatchError, RegretEstimator
from .seeding import derive_rng

__all__ = [
    "Permutation",
    "count_inversions",
    "kendall_distance",
    "footrule_distance",
    "sample_size_p",
    "BandPlan",
    "band_plan",
    "build_ranking_estimator",
    "exact_erm",
    "exact_erm_with_value",
    "exact_min_error",
    "local_search_erm",
    "random_permutation",
    "all_rank_arrays",
    "permutations_to_class",
    "enumerate_sn_class",
    "save_permutation",
    "load_permutation",
]

_EXACT_ERM_MAX_N = 10


class Permutation:
    """Total order on items 0..n-1, stored as a rank array (positions 1..n)."""

    __slots__ = ("rank", "_order")

    def __init__(self, rank):
        rank = np.asarray(rank, dtype=np.int32)
        n = len(rank)
        if n < 2:
            raise ValueError("permutation needs at least 2 items")
        if sorted(rank.tolist()) != list(range(1, n + 1)):
            raise ValueError("rank array must be a permutation of 1..n")
        self.rank = rank
        self._order = None

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(1, n + 1))

    @classmethod
    def from_order(cls, items) -> "Permutation":
        items = np.asarray(items, dtype=np.int64)
        rank = np.empty(len(items), dtype=np.int32)
        rank[items] = np.arange(1, len(items) + 1)
        return cls(rank)

    @property
    def n_items(self) -> int:
        return len(self.rank)

    @property
    def order(self) -> np.ndarray:
        """Items listed from rank 1 to rank n."""
        if self._order is None:
            order = np.empty(self.n_items, dtype=np.int32)
            order[self.rank - 1] = np.arange(self.n_items, dtype=np.int32)
            self._order = order
        return self._order

    def pair_values(self, us, vs) -> np.ndarray:
        return (self.rank[us] < self.rank[vs]).astype(np.uint8)

    def distance_to(self, other: "Permutation") -> float:
        return kendall_distance(self, other)

    def move(self, item: int, position: int) -> "Permutation":
        """New permutation with `item` moved to 1-based `position`."""
        order = np.delete(self.order, self.rank[item] - 1)
        order = np.insert(order, position - 1, item)
        return Permutation.from_order(order)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.rank, other.rank)

    def __hash__(self):
        return hash(self.rank.tobytes())

    def __repr__(self):
        return f"Permutation(rank={self.rank.tolist()})"


def random_permutation(n: int, rng: np.random.Generator) -> Permutation:
    return Permutation.from_order(rng.permutation(n))


def count_inversions(seq) -> int:
    """Out-of-order pair count of a sequence, via merge sort in O(n log n)."""
    arr = list(seq)

    def sort(lo: int, hi: int) -> int:
        if hi - lo <= 1:
            return 0
        mid = (lo + hi) // 2
        inv = sort(lo, mid) + sort(mid, hi)
        merged = []
        i, j = lo, mid
        while i < mid and j < hi:
            if arr[i] <= arr[j]:
                merged.append(arr[i])
                i += 1
            else:
                merged.append(arr[j])
                j += 1
                inv += mid - i
        merged.extend(arr[i:mid])
        merged.extend(arr[j:hi])
        arr[lo:hi] = merged
        return inv

    return sort(0, len(arr))


def kendall_distance(p1: Permutation, p2: Permutation) -> float:
    """Fraction of ordered pairs the two permutations order differently."""
    if p1.n_items != p2.n_items:
        raise PoolMismatchError("permutations have different item counts")
    n = p1.n_items
    seq = p2.rank[p1.order]
    return 2.0 * count_inversions(seq.tolist()) / (n * (n - 1))


def footrule_distance(p1: Permutation, p2: Permutation) -> int:
    """Spearman footrule: total absolute rank displacement (raw count)."""
    if p1.n_items != p2.n_items:
        raise PoolMismatchError("permutations have different item counts")
    return int(np.abs(p1.rank.astype(np.int64) - p2.rank.astype(np.int64)).sum())


def sample_size_p(n: int, epsilon: float, c1: float = 1.0) -> int:
    """Per-band sample count: max(1, ceil(c1 * eps^-3 * log2(n)^3))."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return max(1, math.ceil(c1 * epsilon**-3 * math.log2(n) ** 3))


def _side_ranges(pos: int, lo_gap: int, hi_gap: int, n: int):
    """1-based position ranges at distance gap in [lo_gap, hi_gap] from pos."""
    left = (max(1, pos - hi_gap), pos - lo_gap)
    right = (pos + lo_gap, min(n, pos + hi_gap))
    left = left if left[0] <= left[1] else None
    right = right if right[0] <= right[1] else None
    return left, right


@dataclass(frozen=True)
class BandPlan:
    """Near sets and geometric distance bands induced by a pivot and p."""

    pivot: Permutation
    p: int

    @property
    def n_items(self) -> int:
        return self.pivot.n_items

    @property
    def n_bands(self) -> int:
        """Band indices run 0..ceil(log2 n), most of the top ones empty."""
        return math.ceil(math.log2(self.n_items)) + 1

    def _ranges(self, u: int, i: int):
        lo_gap = (1 << i) * self.p
        hi_gap = (1 << (i + 1)) * self.p - 1
        return _side_ranges(int(self.pivot.rank[u]), lo_gap, hi_gap, self.n_items)

    def near_items(self, u: int) -> np.ndarray:
        left, right = _side_ranges(int(self.pivot.rank[u]), 1, self.p - 1, self.n_items)
        return self._collect(left, right)

    def band_size(self, u: int, i: int) -> int:
        left, right = self._ranges(u, i)
        size = 0
        for rng_ in (left, right):
            if rng_ is not None:
                size += rng_[1] - rng_[0] + 1
        return size

    def band_items(self, u: int, i: int) -> np.ndarray:
        left, right = self._ranges(u, i)
        return self._collect(left, right)

    def _collect(self, left, right) -> np.ndarray:
        order = self.pivot.order
        parts = []
        for rng_ in (left, right):
            if rng_ is not None:
                parts.append(order[rng_[0] - 1 : rng_[1]])
        if not parts:
            return np.empty(0, dtype=np.int32)
        return np.concatenate(parts)


def band_plan(pivot: Permutation, p: int) -> BandPlan:
    if p < 1:
        raise ValueError("p must be at least 1")
    return BandPlan(pivot, p)


def build_ranking_estimator(
    pivot: Permutation,
    oracle,
    params: Params,
    *,
    p: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> RegretEstimator:
    """Band-sampled regret estimator around a pivot permutation.

    Pairs closer than p under the pivot enter deterministically at weight 1;
    each nonempty band contributes p draws with repetition at weight
    band_size / p (or all its pairs at weight 1 when band_size <= p).
    Sampling is sequential over items, so the result depends only on the
    provided stream, never on scheduling.
    """
    n = pivot.n_items
    if oracle.n != n:
        raise PoolMismatchError("oracle and pivot item counts differ")
    if oracle.mode != "ranking":
        raise ValueError("ranking estimator needs a ranking-mode oracle")
    if p is None:
        p = sample_size_p(n, params.epsilon, params.c1)
    if rng is None:
        rng = derive_rng(params.master_seed, "ranking-build")
    order = pivot.order
    rank = pivot.rank
    n_bands = math.ceil(math.log2(n)) + 1
    us_parts, vs_parts, w_parts = [], [], []

    def emit(u: int, items: np.ndarray, w_num: int):
        us_parts.append(np.full(len(items), u, dtype=np.int32))
        vs_parts.append(items.astype(np.int32))
        w_parts.append(np.full(len(items), w_num, dtype=np.int64))

    for u in range(n):
        pos = int(rank[u])
        left, right = _side_ranges(pos, 1, p - 1, n)
        near = _collect_ranges(order, left, right)
        if len(near):
            emit(u, near, p)
        for i in range(n_bands):
            lo_gap = (1 << i) * p
            if lo_gap > n - 1:
                break
            hi_gap = (1 << (i + 1)) * p - 1
            left, right = _side_ranges(pos, lo_gap, hi_gap, n)
            szl = 0 if left is None else left[1] - left[0] + 1
            szr = 0 if right is None else right[1] - right[0] + 1
            size = szl + szr
            if size == 0:
                continue
            if size <= p:
                emit(u, _collect_ranges(order, left, right), p)
            else:
                draws = rng.integers(0, size, size=p)
                positions = np.where(
                    draws < szl,
                    (0 if left is None else left[0]) + draws,
                    (0 if right is None else right[0]) + draws - szl,
                )
                emit(u, order[positions - 1], size)

    us = np.concatenate(us_parts)
    vs = np.concatenate(vs_parts)
    w_num = np.concatenate(w_parts)
    labels = oracle.query_many(us, vs)
    pivot_costs = (pivot.pair_values(us, vs) != labels).astype(np.uint8)
    return RegretEstimator(
        pivot,
        us,
        vs,
        w_num,
        p,
        labels,
        pivot_costs,
        measure_count=n * (n - 1),
        n_items=n,
    )


def _collect_ranges(order: np.ndarray, left, right) -> np.ndarray:
    parts = []
    for rng_ in (left, right):
        if rng_ is not None:
            parts.append(order[rng_[0] - 1 : rng_[1]])
    if not parts:
        return np.empty(0, dtype=np.int32)
    return np.concatenate(parts)


# -- exact ERM by lexicographic enumeration ----------------------------------

_RANK_ARRAY_CACHE: dict[int, np.ndarray] = {}


def all_rank_arrays(n: int) -> np.ndarray:
    """All n! rank arrays, rows in lexicographic order, cached per n."""
    if n < 2 or n > _EXACT_ERM_MAX_N:
        raise ValueError(
            f"exact enumeration supports 2 <= n <= {_EXACT_ERM_MAX_N}; "
            "use local_search_erm for larger pools"
        )
    cached = _RANK_ARRAY_CACHE.get(n)
    if cached is None:
        count = math.factorial(n)
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.permutations(range(1, n + 1))),
            dtype=np.int8,
            count=count * n,
        )
        cached = flat.reshape(count, n)
        _RANK_ARRAY_CACHE[n] = cached
    return cached


def _enumeration_argmin(n, us, vs, labels, weight_num):
    """(best_value, first_minimizer_row) of the weighted mismatch objective."""
    ranks = all_rank_arrays(n)
    us = np.asarray(us)
    vs = np.asarray(vs)
    labels = np.asarray(labels, dtype=np.uint8)
    w = np.asarray(weight_num, dtype=np.float64)
    n_samples = max(1, len(us))
    chunk = max(1024, min(1 << 16, 8_000_000 // n_samples))
    best_val = math.inf
    best_row = 0
    for start in range(0, len(ranks), chunk):
        block = ranks[start : start + chunk]
        if len(us):
            pred = block[:, us] < block[:, vs]
            mismatch = pred != labels
            values = mismatch.astype(np.float64) @ w
        else:
            values = np.zeros(len(block))
        idx = int(np.argmin(values))
        if values[idx] < best_val:
            best_val = float(values[idx])
            best_row = start + idx
    return best_val, best_row


def exact_erm_with_value(est: RegretEstimator, start=None, *, rng=None):
    """Global estimator minimizer over all permutations, plus its objective.

    Ties resolve to the lexicographically smallest rank array because the
    enumeration is lexicographic and the scan keeps the first minimum.
    """
    n = est.n_items
    val, row = _enumeration_argmin(n, est.us, est.vs, est.labels, est.weight_num)
    perm = Permutation(all_rank_arrays(n)[row])
    return perm, (val - est._pivot_int) * est.scale


def exact_erm(est: RegretEstimator, start=None, *, rng=None) -> Permutation:
    return exact_erm_with_value(est, start, rng=rng)[0]


def exact_min_error(oracle) -> tuple[float, Permutation]:
    """(min err over all permutations, its first lexicographic argmin).

    Reads the full label table (verification counter), so it measures the
    best achievable error, not an estimate.
    """
    from .core import Pool

    n = oracle.n
    us, vs = Pool(n).all_pairs()
    labels = oracle.verification_labels(us, vs)
    val, row = _enumeration_argmin(n, us, vs, labels, np.ones(len(us), dtype=np.int64))
    return val / Pool(n).pair_count, Permutation(all_rank_arrays(n)[row])


# -- local search ERM ---------------------------------------------------------


def _insertion_csr(est: RegretEstimator):
    """Per-item partner/delta arrays for insertion moves.

    For each sample (a, b, y, w), moving endpoint u past its partner flips
    the predicate; the objective change of "u after partner" minus "u before
    partner" is +w when y says u should win and -w otherwise.
    """
    s = np.sign(2 * est.labels.astype(np.int64) - 1)
    endpoints = np.concatenate([est.us, est.vs])
    partners = np.concatenate([est.vs, est.us])
    deltas = np.concatenate([est.weight_num * s, -est.weight_num * s])
    order = np.argsort(endpoints, kind="stable")
    endpoints = endpoints[order]
    partners = partners[order].astype(np.int64)
    deltas = deltas[order]
    bounds = np.searchsorted(endpoints, np.arange(est.n_items + 1))
    return partners, deltas, bounds


def _climb(est, start: Permutation, partners, deltas, bounds) -> tuple[Permutation, int]:
    n = est.n_items
    order = start.order.astype(np.int64).copy()
    rank0 = np.empty(n, dtype=np.int64)
    rank0[order] = np.arange(n)
    obj = est.evaluate_int(start)
    moved = True
    while moved:
        moved = False
        for u in range(n):
            lo, hi = bounds[u], bounds[u + 1]
            if lo == hi:
                continue
            g = np.zeros(n, dtype=np.int64)
            np.add.at(g, rank0[partners[lo:hi]], deltas[lo:hi])
            prefix = np.cumsum(g)
            i = rank0[u]
            move_val = np.zeros(n, dtype=np.int64)
            if i + 1 < n:
                move_val[i + 1 :] = prefix[i + 1 :] - prefix[i]
            if i > 0:
                left_prefix = np.concatenate([[0], prefix[: i - 1]]) if i > 1 else np.array([0])
                move_val[:i] = left_prefix - prefix[i - 1]
            j = int(np.argmin(move_val))
            if move_val[j] < 0:
                order = np.insert(np.delete(order, i), j, u)
                rank0[order] = np.arange(n)
                obj += int(move_val[j])
                moved = True
    return Permutation.from_order(order), obj


def local_search_erm(
    est: RegretEstimator,
    start: Permutation,
    *,
    restarts: int = 5,
    rng: Optional[np.random.Generator] = None,
) -> Permutation:
    """First-improvement insertion search, best of `restarts` seeded starts.

    Items are scanned in id order; the first item with an improving insertion
    is moved to its best target (ties to the smallest position).  Restart 0
    starts from `start`, the rest from stream-seeded random permutations, so
    the result never evaluates worse than the start.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if rng is None:
        rng = derive_rng(0, "local-search")
    partners, deltas, bounds = _insertion_csr(est)
    best: tuple[int, int, Permutation] | None = None
    for r in range(restarts):
        h0 = start if r == 0 else random_permutation(est.n_items, rng)
        h_opt, obj = _climb(est, h0, partners, deltas, bounds)
        if best is None or obj < best[0]:
            best = (obj, r, h_opt)
    return best[2]


# -- enumeration as a finite class -------------------------------------------


def permutations_to_class(perms: list[Permutation]):
    """FiniteClass over the ordered-pair pool induced by a list of permutations."""
    from .core import Pool
    from .generic import FiniteClass

    n = perms[0].n_items
    us, vs = Pool(n).all_pairs()
    ranks = np.stack([p.rank for p in perms])
    labels = (ranks[:, us] < ranks[:, vs]).astype(np.uint8)
    pairs = np.stack([us, vs], axis=1)
    return FiniteClass(labels, instance_pairs=pairs, n_items=n)


def enumerate_sn_class(n: int):
    """Every permutation of n items as a finite class over the pair pool."""
    if n > 8:
        raise ValueError("full S_n enumeration as a class is capped at n = 8")
    ranks = all_rank_arrays(n)
    return permutations_to_class([Permutation(r) for r in ranks])


# -- persistence ----------------------------------------------------------------


def save_permutation(perm: Permutation, path: str) -> None:
    """Single CSV row: item ids from rank 1 to rank n."""
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerow(perm.order.tolist())


def load_permutation(path: str) -> Permutation:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) != 1:
        raise ValueError(f"{path} must hold exactly one row of item ids in rank order")
    try:
        items = [int(c) for c in rows[0]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer item id") from exc
    if sorted(items) != list(range(len(items))):
        raise ValueError(f"{path}: row must list each item 0..n-1 exactly once")
    return Permutation.from_order(items)
