import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pivotlearn import NoiseSpec, Params, Pool, make_ranking_oracle, regret
from pivotlearn import ranking as rk
from pivotlearn.seeding import derive_rng


# brute-force reference implementations, kept deliberately dumb
def _inversions_quadratic(seq):
    seq = list(seq)
    return sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])


def _kendall_scan(p1, p2):
    n = p1.n_items
    bad = 0
    for u in range(n):
        for v in range(n):
            if u != v and (p1.rank[u] < p1.rank[v]) != (p2.rank[u] < p2.rank[v]):
                bad += 1
    return bad / (n * (n - 1))


def _regret_scan(pivot, h, oracle):
    us, vs = Pool(pivot.n_items).all_pairs()
    y = oracle.verification_labels(us, vs)
    return (np.mean(h.pair_values(us, vs) != y)
            - np.mean(pivot.pair_values(us, vs) != y))


# ------------------------------------------------------------- permutations

def test_permutation_basics():
    p = rk.Permutation([2, 1, 3])
    assert p.n_items == 3
    assert p.order.tolist() == [1, 0, 2]
    assert rk.Permutation.from_order([1, 0, 2]) == p
    assert rk.Permutation.identity(4).rank.tolist() == [1, 2, 3, 4]


def test_permutation_validation():
    with pytest.raises(ValueError):
        rk.Permutation([1, 1, 3])
    with pytest.raises(ValueError):
        rk.Permutation([0, 1, 2])  # ranks are 1-based


def test_pair_values_definition():
    p = rk.Permutation([2, 1, 3])
    us = np.array([0, 1, 0])
    vs = np.array([1, 0, 2])
    # value 1 iff u precedes v
    assert p.pair_values(us, vs).tolist() == [0, 1, 1]


def test_move_semantics():
    p = rk.Permutation.from_order([3, 0, 2, 1])
    q = p.move(1, 1)  # item 1 to the front
    assert q.order.tolist() == [1, 3, 0, 2]
    r = p.move(3, 4)  # item 3 to the back
    assert r.order.tolist() == [0, 2, 1, 3]
    assert p.order.tolist() == [3, 0, 2, 1]  # original untouched


@given(st.integers(2, 40), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_inversions_match_quadratic_scan(n, seed):
    rng = derive_rng(seed, "inv")
    seq = rng.permutation(n)
    assert rk.count_inversions(seq) == _inversions_quadratic(seq)


def test_kendall_frozen_adjacent_swap():
    # n=4, one adjacent swap: 2 discordant ordered pairs out of 12
    p1 = rk.Permutation([1, 2, 3, 4])
    p2 = rk.Permutation([2, 1, 3, 4])
    assert rk.kendall_distance(p1, p2) == pytest.approx(1 / 6)
    assert rk.footrule_distance(p1, p2) == 2


def test_kendall_extremes():
    p = rk.Permutation([1, 2, 3, 4, 5])
    assert rk.kendall_distance(p, p) == 0.0
    rev = rk.Permutation([5, 4, 3, 2, 1])
    assert rk.kendall_distance(p, rev) == 1.0


@given(st.integers(2, 30), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_kendall_matches_pair_scan(n, seed):
    rng = derive_rng(seed, "kd")
    p1 = rk.random_permutation(n, rng)
    p2 = rk.random_permutation(n, rng)
    assert rk.kendall_distance(p1, p2) == pytest.approx(_kendall_scan(p1, p2))


@given(st.integers(2, 200), st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_footrule_sandwich(n, seed):
    """Inversions <= footrule <= 2 * inversions, always."""
    rng = derive_rng(seed, "dg")
    p1 = rk.random_permutation(n, rng)
    p2 = rk.random_permutation(n, rng)
    inv = round(rk.kendall_distance(p1, p2) * n * (n - 1) / 2)
    foot = rk.footrule_distance(p1, p2)
    assert inv <= foot <= 2 * inv


# --------------------------------------------------------------- band plans

def test_sample_size_p_frozen():
    assert rk.sample_size_p(1024, 0.2, 1.0) == 125000
    assert rk.sample_size_p(1024, 0.2, 1e-3) == 125
    assert rk.sample_size_p(2, 0.9, 1e-6) == 1  # floor clamp


def test_band_plan_frozen_example():
    # identity pivot over 10 items, p=3, inspected at the rank-5 item
    plan = rk.band_plan(rk.Permutation.identity(10), 3)
    u = 4  # item at position 5
    assert sorted(plan.near_items(u).tolist()) == [2, 3, 5, 6]
    assert sorted(plan.band_items(u, 0).tolist()) == [0, 1, 7, 8, 9]
    assert plan.band_size(u, 1) == 0


def test_band_plan_partitions_everything():
    for n, p in ((8, 2), (30, 3), (157, 5)):
        plan = rk.band_plan(rk.random_permutation(n, derive_rng(n, "bp")), p)
        for u in range(n):
            seen = list(plan.near_items(u))
            for i in range(plan.n_bands):
                seen.extend(plan.band_items(u, i))
            assert sorted(seen) == sorted(set(seen)), "overlapping bands"
            assert sorted(seen) == [x for x in range(n) if x != u]


def test_band_gaps_form_geometric_ladder():
    plan = rk.band_plan(rk.Permutation.identity(64), 3)
    pos = plan.pivot.rank[10]
    for i in range(plan.n_bands):
        for item in plan.band_items(10, i):
            gap = abs(int(plan.pivot.rank[item]) - int(pos))
            assert 3 * 2**i <= gap < 3 * 2 ** (i + 1)


# ---------------------------------------------------------------- estimator

def _fixture(n, seed, eta=0.2):
    truth = rk.random_permutation(n, derive_rng(seed, "t"))
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=eta), seed=seed)
    pivot = rk.random_permutation(n, derive_rng(seed, "p"))
    return oracle, pivot


def test_build_exhaustive_is_exact():
    n = 6
    oracle, pivot = _fixture(n, 31)
    est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=n)
    for arr in rk.all_rank_arrays(n):
        h = rk.Permutation(arr)
        assert abs(est.evaluate(h) - _regret_scan(pivot, h, oracle)) < 1e-12


def test_build_unbiased_at_small_p():
    n = 8
    oracle, pivot = _fixture(n, 32)
    h = rk.random_permutation(n, derive_rng(32, "h"))
    target = _regret_scan(pivot, h, oracle)
    vals = [rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=2,
                                       rng=derive_rng(32, "b", b)).evaluate(h)
            for b in range(3000)]
    vals = np.asarray(vals)
    stderr = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - target) <= max(4 * stderr, 1e-12)


def test_build_deterministic_given_rng_stream():
    n = 9
    oracle, pivot = _fixture(n, 33)
    a = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=3, rng=derive_rng(1, "x"))
    b = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=3, rng=derive_rng(1, "x"))
    assert np.array_equal(a.us, b.us) and np.array_equal(a.vs, b.vs)
    assert np.array_equal(a.weight_num, b.weight_num)


def test_build_uses_formula_p_by_default():
    n = 16
    oracle, pivot = _fixture(n, 34)
    params = Params(epsilon=0.5, c1=1e-3)
    est = rk.build_ranking_estimator(pivot, oracle, params)
    assert est.weight_denom == rk.sample_size_p(n, 0.5, 1e-3)


def test_query_count_within_construction_cap():
    n, p = 40, 3
    oracle, pivot = _fixture(n, 35)
    rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=p, rng=derive_rng(35, "b"))
    cap = n * (2 * p + p * (int(np.ceil(np.log2(n))) + 1))
    assert oracle.counters.distinct_labeled <= cap


# ----------------------------------------------------------------- the ERMs

def test_all_rank_arrays_lexicographic():
    arrs = rk.all_rank_arrays(3)
    assert arrs.shape == (6, 3)
    assert arrs[0].tolist() == [1, 2, 3]
    assert arrs[-1].tolist() == [3, 2, 1]
    assert len(rk.all_rank_arrays(7)) == 5040


def test_all_rank_arrays_cap():
    with pytest.raises(ValueError, match="local_search_erm"):
        rk.all_rank_arrays(11)


def test_exact_erm_matches_brute_force():
    n = 6
    oracle, pivot = _fixture(n, 36)
    est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=2,
                                     rng=derive_rng(36, "b"))
    best, val = rk.exact_erm_with_value(est)
    brute = min(est.evaluate(rk.Permutation(a)) for a in rk.all_rank_arrays(n))
    assert val == pytest.approx(brute, abs=1e-15)
    assert est.evaluate(best) == pytest.approx(brute, abs=1e-15)


def test_exact_erm_first_minimizer_tie_break():
    """With an empty sample every permutation ties at 0; lexicographic first wins."""
    from pivotlearn import RegretEstimator

    est = RegretEstimator(
        pivot=rk.Permutation.identity(4),
        us=np.array([], dtype=np.int64), vs=np.array([], dtype=np.int64),
        labels=np.array([], dtype=np.uint8),
        weight_num=np.array([], dtype=np.int64),
        weight_denom=1, pivot_costs=np.array([], dtype=np.uint8),
        measure_count=12, n_items=4,
    )
    best = rk.exact_erm(est)
    assert best.rank.tolist() == [1, 2, 3, 4]


def test_exact_min_error_finds_truth_when_noiseless():
    n = 5
    truth = rk.random_permutation(n, derive_rng(38, "t"))
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="none"), seed=38)
    nu, best = rk.exact_min_error(oracle)
    assert nu == 0.0
    assert best == truth


def test_local_search_matches_exact_on_small_instances():
    for seed in range(6):
        n = 7
        oracle, pivot = _fixture(n, 40 + seed)
        est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.2), p=3,
                                         rng=derive_rng(seed, "b"))
        _, exact_val = rk.exact_erm_with_value(est)
        found = rk.local_search_erm(est, pivot, restarts=20, rng=derive_rng(seed, "ls"))
        assert est.evaluate(found) == pytest.approx(exact_val, abs=1e-12)


def test_local_search_never_worse_than_start():
    n = 30
    oracle, pivot = _fixture(n, 50)
    est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.3), p=3,
                                     rng=derive_rng(50, "b"))
    found = rk.local_search_erm(est, pivot, restarts=3, rng=derive_rng(50, "ls"))
    assert est.evaluate_int(found) <= est.evaluate_int(pivot)


def test_regret_helper_agrees_with_scan():
    n = 6
    oracle, pivot = _fixture(n, 51)
    h = rk.random_permutation(n, derive_rng(51, "h"))
    assert regret(pivot, h, oracle) == pytest.approx(_regret_scan(pivot, h, oracle))


# -------------------------------------------------------------- persistence

def test_permutation_roundtrip(tmp_path):
    p = rk.Permutation.from_order([4, 0, 3, 1, 2])
    path = str(tmp_path / "perm.csv")
    rk.save_permutation(p, path)
    assert rk.load_permutation(path) == p


def test_load_permutation_rejects_bad_ids(tmp_path):
    path = tmp_path / "perm.csv"
    path.write_text("0,1,1\n")
    with pytest.raises(ValueError):
        rk.load_permutation(str(path))


def test_enumerate_sn_class_shape():
    cls = rk.enumerate_sn_class(4)
    assert len(cls) == 24
    assert cls.pool_size == 12
    assert cls.n_items == 4
