import numpy as np
import pytest

from pivotlearn import (
    BudgetExceededError,
    ErmFailedError,
    Insertion,
    NoiseSpec,
    Params,
    Pool,
    PoolMismatchError,
    Reassignment,
    RegretEstimator,
    distance,
    make_clustering_oracle,
    make_ranking_oracle,
    regret,
    run_erm_iteration,
    true_error,
)
from pivotlearn import clustering as clu
from pivotlearn import ranking as rk
from pivotlearn.seeding import derive_rng


def test_pool_all_pairs():
    us, vs = Pool(4).all_pairs()
    pairs = set(zip(us.tolist(), vs.tolist()))
    assert len(pairs) == 12  # n(n-1) ordered, no self pairs
    assert (0, 0) not in pairs
    assert (1, 3) in pairs and (3, 1) in pairs
    assert Pool(4).pair_count == 12


def test_pool_rejects_tiny():
    with pytest.raises(ValueError):
        Pool(1)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(epsilon=0.0)
    with pytest.raises(ValueError):
        Params(epsilon=1.0)
    with pytest.raises(ValueError):
        Params(epsilon=0.2, mu=0.0)
    with pytest.raises(ValueError):
        Params(epsilon=0.2, mu=1.5)
    with pytest.raises(ValueError):
        Params(epsilon=0.2, delta=1.0)
    with pytest.raises(ValueError):
        Params(epsilon=0.2, iterations=0)
    with pytest.raises(ValueError):
        Params(epsilon=0.2, c1=0.0)


def test_params_resolved_mu_and_overrides():
    p = Params(epsilon=0.2)
    assert p.resolved_mu(56) == 1.0 / 56
    assert p.with_overrides(mu=0.25).resolved_mu(56) == 0.25
    assert p.with_overrides(epsilon=0.3).epsilon == 0.3
    assert p.epsilon == 0.2  # original untouched


# ---------------------------------------------------------------- estimator

def _tiny_estimator():
    """Hand-built 3-sample estimator over a 4-item pair pool."""
    pivot = rk.Permutation([1, 2, 3, 4])
    us = np.array([0, 2, 1])
    vs = np.array([1, 3, 0])
    labels = np.array([1, 0, 0], dtype=np.uint8)
    w = np.array([2, 1, 2], dtype=np.int64)
    # pivot predicts 1,1,0 on the samples; costs = prediction != label
    costs = np.array([0, 1, 0], dtype=np.uint8)
    return RegretEstimator(
        pivot=pivot, us=us, vs=vs, labels=labels,
        weight_num=w, weight_denom=2, pivot_costs=costs,
        measure_count=12, n_items=4,
    )


def test_estimator_pivot_evaluates_to_zero():
    est = _tiny_estimator()
    assert est.evaluate(est.pivot) == 0.0
    assert est.evaluate_int(est.pivot) == 0


def test_estimator_matches_hand_computation():
    est = _tiny_estimator()
    h = rk.Permutation([2, 1, 3, 4])  # swaps items 0 and 1
    # pivot costs: pairs (0,1),(2,3),(1,0) labeled 1,0,0 -> pivot predicts 1,1,0
    # pivot disagreement on samples: [0,1,0] -> pivot_int = 0*2+1*1+0*2 = 1
    # h predicts (0,1)->0, (2,3)->1, (1,0)->1 -> costs [1,1,1]
    # h_int = 2+1+2 = 5; value = (5-1)/(12*2)
    assert est.evaluate_int(h) == 4
    assert est.evaluate(h) == 4 / 24


def test_estimator_scale_property():
    est = _tiny_estimator()
    assert est.scale == 1.0 / (12 * 2)
    assert est.n_samples == 3
    assert est.is_pair_mode


def test_estimator_rejects_shape_mismatch():
    pivot = rk.Permutation([1, 2, 3, 4])
    with pytest.raises(ValueError):
        RegretEstimator(
            pivot=pivot, us=np.array([0]), vs=np.array([1, 2]),
            labels=np.array([1], dtype=np.uint8),
            weight_num=np.array([1], dtype=np.int64),
            weight_denom=1, pivot_costs=np.array([0], dtype=np.uint8),
            measure_count=12, n_items=4,
        )


def test_estimator_rejects_self_pairs():
    pivot = rk.Permutation([1, 2, 3, 4])
    with pytest.raises(ValueError):
        RegretEstimator(
            pivot=pivot, us=np.array([2]), vs=np.array([2]),
            labels=np.array([1], dtype=np.uint8),
            weight_num=np.array([1], dtype=np.int64),
            weight_denom=1, pivot_costs=np.array([0], dtype=np.uint8),
            measure_count=12, n_items=4,
        )


def test_delta_insertion_matches_full_evaluation():
    rng = derive_rng(5, "delta")
    n = 7
    truth = rk.random_permutation(n, rng)
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=0.2), seed=5)
    pivot = rk.random_permutation(n, rng)
    est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.3), p=3, rng=rng)
    h = rk.random_permutation(n, rng)
    base = est.evaluate_int(h)
    for item in range(n):
        for pos in range(1, n + 1):
            mv = Insertion(item=item, position=pos)
            assert base + est.evaluate_delta_int(h, mv) == est.evaluate_int(h.move(item, pos))


def test_delta_reassignment_matches_full_evaluation():
    rng = derive_rng(6, "delta")
    n, k = 8, 3
    truth = clu.random_clustering(n, k, rng)
    oracle = make_clustering_oracle(truth, NoiseSpec(kind="uniform_flip", eta=0.2), seed=6)
    pivot = clu.random_clustering(n, k, rng)
    est = clu.build_clustering_estimator(pivot, oracle, Params(epsilon=0.3), q=3, rng=rng)
    h = clu.random_clustering(n, k, rng)
    base = est.evaluate_int(h)
    for item in range(n):
        for cid in range(1, k + 1):
            assign = h.assign.copy()
            assign[item] = cid
            moved = clu.Clustering(assign, k)
            delta = est.evaluate_delta_int(h, Reassignment(item=item, cluster=cid))
            assert base + delta == est.evaluate_int(moved)


def test_evaluate_delta_scaled():
    est = _tiny_estimator()
    h = rk.Permutation([2, 1, 3, 4])
    mv = Insertion(item=0, position=1)
    assert est.evaluate_delta(h, mv) == est.evaluate_delta_int(h, mv) * est.scale


# ---------------------------------------------------------------- distances

def test_distance_dispatch():
    p1 = rk.Permutation([1, 2, 3])
    p2 = rk.Permutation([2, 1, 3])
    assert distance(p1, p2) == p1.distance_to(p2)
    c1 = clu.Clustering([1, 1, 2], 2)
    c2 = clu.Clustering([1, 2, 2], 2)
    assert distance(c1, c2) == c1.distance_to(c2)


def test_distance_pool_mismatch_and_cross_type():
    with pytest.raises(PoolMismatchError):
        distance(rk.Permutation([1, 2]), clu.Clustering([1, 1, 2], 2))
    # mixed hypothesis kinds on the same pool fall back to the generic
    # pair scan: perm predicts [1,0], one-cluster clustering [1,1]
    assert distance(rk.Permutation([1, 2]), clu.Clustering([1, 1], 1)) == 0.5


# ------------------------------------------------------- error/regret oracle

def test_true_error_against_direct_scan():
    n = 6
    rng = derive_rng(9, "err")
    truth = rk.random_permutation(n, rng)
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=0.3), seed=9)
    h = rk.random_permutation(n, rng)
    us, vs = Pool(n).all_pairs()
    ref = np.mean(oracle.verification_labels(us, vs) != h.pair_values(us, vs))
    assert true_error(h, oracle) == pytest.approx(ref, abs=1e-15)
    # verification reads never touch the labeled-query counters
    assert oracle.counters.distinct_labeled == 0
    assert oracle.counters.verification_reads > 0


def test_true_error_refuses_budget_capped_oracle():
    truth = rk.Permutation([1, 2, 3, 4])
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="none"), seed=0, budget=5)
    with pytest.raises(ValueError):
        true_error(truth, oracle)


def test_regret_is_error_difference():
    n = 5
    rng = derive_rng(11, "reg")
    truth = rk.random_permutation(n, rng)
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=0.1), seed=11)
    a = rk.random_permutation(n, rng)
    b = rk.random_permutation(n, rng)
    assert regret(a, b, oracle) == pytest.approx(true_error(b, oracle) - true_error(a, oracle))


# ------------------------------------------------------------- the iteration

def _ranking_setup(n, seed, eta=0.1, budget=None):
    truth = rk.random_permutation(n, derive_rng(seed, "t"))
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=eta),
                                 seed=seed, budget=budget)
    return oracle


def test_run_erm_iteration_row_shape():
    n = 6
    oracle = _ranking_setup(n, 21)
    params = Params(epsilon=0.25, iterations=3, master_seed=21)
    traj = run_erm_iteration(
        h0=rk.Permutation.identity(n), oracle=oracle, params=params,
        builder=lambda h, orc, prm, rng=None: rk.build_ranking_estimator(h, orc, prm, p=2, rng=rng),
        erm=lambda est, start, rng=None: rk.exact_erm(est, start, rng=rng),
    )
    assert traj.status == "completed"
    assert [r.iteration for r in traj.rows] == [0, 1, 2, 3]
    assert traj.rows[0].distinct_queries == 0
    assert traj.rows[0].estimator_value is None
    cums = [r.cumulative_queries for r in traj.rows]
    assert cums == sorted(cums)
    assert traj.final_hypothesis.n_items == n


def test_run_erm_iteration_deterministic():
    n = 6

    def build(h, orc, prm, rng=None):
        return rk.build_ranking_estimator(h, orc, prm, p=2, rng=rng)

    def erm(est, start, rng=None):
        return rk.exact_erm(est, start, rng=rng)

    runs = []
    for _ in range(2):
        oracle = _ranking_setup(n, 22)
        traj = run_erm_iteration(
            h0=rk.Permutation.identity(n), oracle=oracle,
            params=Params(epsilon=0.25, iterations=3, master_seed=22),
            builder=build, erm=erm,
        )
        runs.append([(r.err, r.distinct_queries, r.cumulative_queries) for r in traj.rows])
    assert runs[0] == runs[1]


def test_run_erm_iteration_budget_exhaustion():
    n = 8
    oracle = _ranking_setup(n, 23, budget=10)
    params = Params(epsilon=0.2, iterations=4, master_seed=23)
    traj = run_erm_iteration(
        h0=rk.Permutation.identity(n), oracle=oracle, params=params,
        builder=lambda h, orc, prm, rng=None: rk.build_ranking_estimator(h, orc, prm, p=3, rng=rng),
        erm=lambda est, start, rng=None: rk.exact_erm(est, start, rng=rng),
    )
    assert traj.status == "budget_exhausted"
    assert len(traj.rows) >= 1  # keeps the rows it managed to finish


def test_run_erm_iteration_wraps_erm_failure():
    n = 5
    oracle = _ranking_setup(n, 24)

    def bad_erm(est, start, rng=None):
        raise RuntimeError("solver blew up")

    with pytest.raises(ErmFailedError) as exc:
        run_erm_iteration(
            h0=rk.Permutation.identity(n), oracle=oracle,
            params=Params(epsilon=0.2, iterations=2, master_seed=24),
            builder=lambda h, orc, prm, rng=None: rk.build_ranking_estimator(h, orc, prm, p=2, rng=rng),
            erm=bad_erm,
        )
    assert exc.value.trajectory.rows  # partial trajectory attached


def test_budget_error_propagates_from_oracle():
    oracle = _ranking_setup(6, 25, budget=3)
    with pytest.raises(BudgetExceededError):
        oracle.query_many(np.array([0, 1, 2, 3]), np.array([1, 2, 3, 4]))
