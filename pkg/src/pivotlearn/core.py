"""Pool model, run parameters, regret estimators, and the ERM iteration loop.

The instance space is the set of N = n*(n-1) ordered distinct pairs over n
items, weighted uniformly.  A hypothesis is anything that can score pairs:
permutations (pivotlearn.ranking) answer "is u ranked above v", clusterings
(pivotlearn.clustering) answer "are u and v together".  Finite label classes
(pivotlearn.generic) use plain 0/1 vectors over an abstract pool instead.

A RegretEstimator is a weighted sample of the instance space centred on a
pivot hypothesis.  Its value at h is an unbiased, cheap stand-in for
err(h) - err(pivot).  All costs are accumulated as exact integer counts and
divided once at the end, so evaluation is reproducible to the bit and the
pivot always evaluates to exactly 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .seeding import derive_rng

__all__ = [
    "Pool",
    "Params",
    "RegretEstimator",
    "Insertion",
    "Reassignment",
    "Trajectory",
    "TrajectoryRow",
    "ErmFailedError",
    "PoolMismatchError",
    "distance",
    "true_error",
    "regret",
    "run_erm_iteration",
]


class PoolMismatchError(ValueError):
    """Hypothesis and pool (or two hypotheses) disagree on the item count."""


class ErmFailedError(RuntimeError):
    """ERM step failed inside the iteration loop; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class Pool:
    """n items; the instance space is all ordered distinct pairs."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("pool needs at least 2 items")

    @property
    def pair_count(self) -> int:
        return self.n * (self.n - 1)

    def all_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (us, vs) enumerating every ordered distinct pair once."""
        idx = np.arange(self.n)
        us = np.repeat(idx, self.n - 1)
        grid = np.tile(idx, (self.n, 1))
        vs = grid[~np.eye(self.n, dtype=bool)]
        return us.astype(np.int32), vs.astype(np.int32)


@dataclass(frozen=True)
class Params:
    """Run parameters shared by all estimator builders.

    The approximation guarantees behind the sample-size formulas are proved
    for epsilon below 1/5; the toolkit accepts any epsilon in (0, 1) so the
    scaling experiments can push past that regime.
    """

    epsilon: float
    mu: Optional[float] = None
    delta: float = 0.1
    iterations: int = 3
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.mu is not None and not (0.0 < self.mu <= 1.0):
            raise ValueError(f"mu must be in (0, 1], got {self.mu}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        for name in ("c1", "c2", "c3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if int(self.master_seed) < 0:
            raise ValueError("master_seed must be non-negative")

    def resolved_mu(self, measure_count: int) -> float:
        """mu, defaulting to one atom of the instance measure (1/N)."""
        return self.mu if self.mu is not None else 1.0 / measure_count

    def with_overrides(self, **kw) -> "Params":
        return replace(self, **kw)


@dataclass(frozen=True)
class Insertion:
    """Move one item so it ends up at `position` (1-based) in rank order."""

    item: int
    position: int


@dataclass(frozen=True)
class Reassignment:
    """Move one item to cluster id `cluster` (1-based)."""

    item: int
    cluster: int


class RegretEstimator:
    """Weighted sample estimating err(h) - err(pivot).

    Pair mode (vs is an array): samples are ordered pairs scored through
    h.pair_values.  Indexed mode (vs is None): samples are pool indices and
    h is a 0/1 label vector.  weight_num / weight_denom are exact rational
    weights; evaluation sums integers and applies the single global scale
    1 / (measure_count * weight_denom) at the end.
    """

    def __init__(
        self,
        pivot,
        us: np.ndarray,
        vs: Optional[np.ndarray],
        weight_num: np.ndarray,
        weight_denom: int,
        labels: np.ndarray,
        pivot_costs: np.ndarray,
        measure_count: int,
        n_items: int,
    ):
        self.pivot = pivot
        self.us = np.asarray(us, dtype=np.int64)
        self.vs = None if vs is None else np.asarray(vs, dtype=np.int64)
        self.weight_num = np.asarray(weight_num, dtype=np.int64)
        self.weight_denom = int(weight_denom)
        self.labels = np.asarray(labels, dtype=np.uint8)
        self.pivot_costs = np.asarray(pivot_costs, dtype=np.uint8)
        self.measure_count = int(measure_count)
        self.n_items = int(n_items)
        if self.weight_denom <= 0:
            raise ValueError("weight_denom must be positive")
        if np.any(self.weight_num <= 0):
            raise ValueError("every sample weight must be positive")
        sizes = {len(self.us), len(self.weight_num), len(self.labels), len(self.pivot_costs)}
        if self.vs is not None:
            sizes.add(len(self.vs))
        if len(sizes) > 1:
            raise ValueError("sample arrays must have equal length")
        if self.vs is not None and np.any(self.us == self.vs):
            raise ValueError("self pairs are outside the pool")
        # integer part of the pivot regret, fixed at construction
        self._pivot_int = int(self.weight_num @ self.pivot_costs.astype(np.int64))

    @property
    def n_samples(self) -> int:
        return len(self.us)

    @property
    def is_pair_mode(self) -> bool:
        return self.vs is not None

    @property
    def weights(self) -> np.ndarray:
        """Float view of the sample weights (weight_num / weight_denom)."""
        return self.weight_num / self.weight_denom

    @property
    def scale(self) -> float:
        return 1.0 / (self.measure_count * self.weight_denom)

    def samples(self) -> list[tuple]:
        """(u, v, weight, y_label, pivot_cost) tuples; v is None in indexed mode."""
        out = []
        for i in range(self.n_samples):
            v = int(self.vs[i]) if self.vs is not None else None
            out.append(
                (
                    int(self.us[i]),
                    v,
                    float(self.weight_num[i]) / self.weight_denom,
                    int(self.labels[i]),
                    int(self.pivot_costs[i]),
                )
            )
        return out

    def _costs(self, h) -> np.ndarray:
        if self.vs is None:
            values = np.asarray(h, dtype=np.uint8)
            if values.shape != (self.measure_count,):
                raise PoolMismatchError(
                    f"label vector of length {values.shape} does not match pool "
                    f"size {self.measure_count}"
                )
            pred = values[self.us]
        else:
            if getattr(h, "n_items", self.n_items) != self.n_items:
                raise PoolMismatchError("hypothesis item count does not match estimator")
            pred = h.pair_values(self.us, self.vs)
        return (pred != self.labels).astype(np.uint8)

    def evaluate_int(self, h) -> int:
        """Integer numerator of evaluate(); exact, order-independent."""
        costs = self._costs(h).astype(np.int64)
        return int(self.weight_num @ costs) - self._pivot_int

    def evaluate(self, h) -> float:
        return self.evaluate_int(h) * self.scale

    @cached_property
    def per_item_index(self) -> list[np.ndarray]:
        """item -> positions of samples touching it (each sample listed twice)."""
        if self.vs is None:
            raise ValueError("per_item_index is only defined for pair-mode estimators")
        endpoints = np.concatenate([self.us, self.vs])
        positions = np.concatenate([np.arange(self.n_samples)] * 2)
        order = np.argsort(endpoints, kind="stable")
        endpoints = endpoints[order]
        positions = positions[order]
        bounds = np.searchsorted(endpoints, np.arange(self.n_items + 1))
        return [positions[bounds[i] : bounds[i + 1]] for i in range(self.n_items)]

    def evaluate_delta_int(self, h, move) -> int:
        """Integer numerator of evaluate(h after move) - evaluate(h)."""
        if self.vs is None:
            raise ValueError("delta evaluation needs a pair-mode estimator")
        idx = self.per_item_index[move.item]
        if len(idx) == 0:
            return 0
        us = self.us[idx]
        vs = self.vs[idx]
        labels = self.labels[idx].astype(np.int64)
        w = self.weight_num[idx]
        old_pred = h.pair_values(us, vs).astype(np.int64)
        new_pred = _moved_pair_values(h, move, us, vs)
        delta = (new_pred != labels).astype(np.int64) - (old_pred != labels).astype(np.int64)
        return int(w @ delta)

    def evaluate_delta(self, h, move) -> float:
        return self.evaluate_delta_int(h, move) * self.scale


def _moved_pair_values(h, move, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Pair predicate after applying `move` to h, for pairs touching move.item."""
    if isinstance(move, Insertion):
        rank = h.rank
        item = move.item
        j = move.position
        if not (1 <= j <= len(rank)):
            raise ValueError(f"target position {j} out of range")
        # position of the partner once `item` is removed from the order
        partner = np.where(us == item, vs, us)
        ppos = rank[partner] - (rank[partner] > rank[item]).astype(rank.dtype)
        item_before = j <= ppos
        pred = np.where(us == item, item_before, ~item_before)
        return pred.astype(np.int64)
    if isinstance(move, Reassignment):
        assign = h.assign
        partner = np.where(us == move.item, vs, us)
        return (assign[partner] == move.cluster).astype(np.int64)
    raise TypeError(f"unsupported move type {type(move)!r}")


def distance(h1, h2) -> float:
    """Normalized pair-disagreement pseudometric between two hypotheses."""
    n = getattr(h1, "n_items", None)
    if n is None or getattr(h2, "n_items", None) != n:
        raise PoolMismatchError("hypotheses live on different pools")
    own = getattr(h1, "distance_to", None)
    if own is not None and type(h1) is type(h2):
        return own(h2)
    us, vs = Pool(n).all_pairs()
    diff = h1.pair_values(us, vs) != h2.pair_values(us, vs)
    return float(np.count_nonzero(diff)) / Pool(n).pair_count


def true_error(h, oracle) -> float:
    """err(h): disagreement of h with the oracle over all N ordered pairs.

    Reads the full label table through the verification counter; refuses to
    run against a budget-capped oracle.
    """
    if getattr(oracle, "budget", None) is not None:
        raise ValueError("true_error needs an unrestricted oracle (budget is set)")
    n = oracle.n
    if getattr(h, "n_items", n) != n:
        raise PoolMismatchError("hypothesis item count does not match oracle")
    us, vs = Pool(n).all_pairs()
    labels = oracle.verification_labels(us, vs)
    pred = h.pair_values(us, vs)
    return float(np.count_nonzero(pred != labels)) / Pool(n).pair_count


def regret(h_pivot, h, oracle) -> float:
    """err(h) - err(h_pivot), computed from full verification scans."""
    return true_error(h, oracle) - true_error(h_pivot, oracle)


@dataclass
class TrajectoryRow:
    iteration: int
    hypothesis: object
    err: Optional[float]
    estimator_value: Optional[float]
    distinct_queries: int
    cumulative_queries: int
    wall_ms: float


@dataclass
class Trajectory:
    rows: list[TrajectoryRow] = field(default_factory=list)
    status: str = "completed"

    @property
    def final_hypothesis(self):
        return self.rows[-1].hypothesis if self.rows else None


BuilderFn = Callable[..., RegretEstimator]
ErmFn = Callable[..., object]


def run_erm_iteration(
    h0,
    oracle,
    params: Params,
    builder: BuilderFn,
    erm: ErmFn,
    *,
    record_errors: bool = True,
) -> Trajectory:
    """Iterate estimator construction and ERM for params.iterations rounds.

    Round i builds an estimator pivoted at the current hypothesis and moves
    to the estimator's minimizer.  Per-round distinct query counts are taken
    from the oracle's counters.  On oracle budget exhaustion the loop stops
    with status "budget_exhausted" and the partial trajectory; an ERM failure
    raises ErmFailedError carrying the partial trajectory.
    """
    from .oracles import BudgetExceededError  # local import, no cycle at module load

    record_errors = record_errors and getattr(oracle, "budget", None) is None
    seed = params.master_seed
    traj = Trajectory()
    err0 = true_error(h0, oracle) if record_errors else None
    cumulative = oracle.counters.distinct_labeled
    traj.rows.append(TrajectoryRow(0, h0, err0, None, 0, cumulative, 0.0))
    h = h0
    for i in range(1, params.iterations + 1):
        t0 = time.perf_counter()
        before = oracle.counters.distinct_labeled
        try:
            est = builder(h, oracle, params, rng=derive_rng(seed, "build", i))
        except BudgetExceededError:
            traj.status = "budget_exhausted"
            return traj
        try:
            h_next = erm(est, h, rng=derive_rng(seed, "erm", i))
        except Exception as exc:  # noqa: BLE001 - deliberate catch-all at the loop boundary
            traj.status = "erm_failed"
            raise ErmFailedError(f"ERM failed at iteration {i}: {exc}", traj) from exc
        spent = oracle.counters.distinct_labeled - before
        cumulative = oracle.counters.distinct_labeled
        err_i = true_error(h_next, oracle) if record_errors else None
        wall_ms = (time.perf_counter() - t0) * 1000.0
        traj.rows.append(
            TrajectoryRow(i, h_next, err_i, est.evaluate(h_next), spent, cumulative, wall_ms)
        )
        h = h_next
    return traj
