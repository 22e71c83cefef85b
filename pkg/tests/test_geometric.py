import itertools

import numpy as np
import pytest

from pivotlearn import NoiseSpec, Params, make_ranking_oracle
from pivotlearn import geometric as geo
from pivotlearn import ranking as rk
from pivotlearn.seeding import derive_rng


def test_feature_set_validation():
    geo.FeatureSet(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        geo.FeatureSet(np.array([[0.0, 1.0]]))  # one item is not a ranking problem
    with pytest.raises(ValueError):
        geo.FeatureSet(np.array([[np.nan, 1.0], [1.0, 0.0]]))


def test_induced_permutation_simple():
    feats = geo.FeatureSet(np.array([[0.0, 1.0], [2.0, 0.0], [1.0, 0.0]]))
    p = geo.induced_permutation(np.array([1.0, 0.0]), feats)
    # scores 0, 2, 1: item 1 first, then 2, then 0
    assert p.order.tolist() == [1, 2, 0]


def test_induced_permutation_rejects_ties():
    feats = geo.FeatureSet(np.array([[0.0, 1.0], [0.0, 2.0], [1.0, 0.0]]))
    with pytest.raises(geo.DegenerateGeometryError) as exc:
        geo.induced_permutation(np.array([1.0, 0.0]), feats)  # items 0,1 tie at 0
    assert exc.value.pair == (0, 1)


def test_enumerate_orders_three_points():
    # generic triangle: all 6 orders of 3 items are realizable
    feats = geo.FeatureSet(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
    orders, angles = geo.enumerate_orders_2d(feats)
    assert len(orders) == 6
    assert len(angles) == 6
    assert len({tuple(o.rank.tolist()) for o in orders}) == 6


def test_enumerate_orders_count_bound_and_uniqueness():
    for seed in range(8):
        n = int(derive_rng(seed, "n").integers(4, 10))
        feats = geo.random_features(n, 2, derive_rng(seed, "f"))
        orders, angles = geo.enumerate_orders_2d(feats)
        assert len(orders) <= n * (n - 1)
        keys = {tuple(o.rank.tolist()) for o in orders}
        assert len(keys) == len(orders)


def test_enumerated_witnesses_reproduce_orders():
    feats = geo.random_features(7, 2, derive_rng(3, "f"))
    orders, angles = geo.enumerate_orders_2d(feats)
    for o, a in zip(orders, angles):
        w = np.array([np.cos(a), np.sin(a)])
        assert geo.induced_permutation(w, feats) == o


def test_adjacent_orders_differ_by_one_swap():
    feats = geo.random_features(6, 2, derive_rng(4, "f"))
    orders, _ = geo.enumerate_orders_2d(feats)
    N = 6 * 5
    ring = orders + [orders[0]]
    for a, b in zip(ring, ring[1:]):
        inv = round(rk.kendall_distance(a, b) * N / 2)
        assert inv == 1


def test_enumerate_rejects_duplicate_points():
    feats = geo.FeatureSet(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))
    with pytest.raises(geo.DegenerateGeometryError):
        geo.enumerate_orders_2d(feats)


def test_jitter_breaks_degeneracy():
    feats = geo.FeatureSet(np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]))  # collinear
    with pytest.raises(geo.DegenerateGeometryError):
        geo.enumerate_orders_2d(feats)
    fixed = geo.jitter_features(feats, seed=1)
    orders, _ = geo.enumerate_orders_2d(fixed)
    assert len(orders) >= 2
    # jitter is tiny
    assert np.max(np.abs(fixed.vectors - feats.vectors)) < 1e-6


def test_disagreement_bound_report():
    feats = geo.random_features(8, 2, derive_rng(5, "f"))
    orders, _ = geo.enumerate_orders_2d(feats)
    radii = [0.0, 1 / 56, 3 / 56, 0.25, 1.0]
    report = geo.verify_disagreement_bound(feats, orders[0], radii)
    assert [r["radius"] for r in report] == radii
    for row in report:
        assert row["dis_measure"] <= row["bound"] + 1e-12
        assert row["ball_size"] >= 1
        if row["radius"] > 0:
            assert row["ratio"] == pytest.approx(row["dis_measure"] / row["radius"])
        assert row["ratio"] <= 8 * 8 + 1e-9


def test_disagreement_bound_rejects_foreign_pivot():
    feats = geo.random_features(6, 2, derive_rng(6, "f"))
    stranger = rk.Permutation.identity(6)
    orders, _ = geo.enumerate_orders_2d(feats)
    if all(o != stranger for o in orders):
        with pytest.raises(geo.DegenerateGeometryError):
            geo.verify_disagreement_bound(feats, stranger, [0.1])


def test_geometric_erm_matches_cell_scan():
    for seed in range(5):
        n = 7
        feats = geo.random_features(n, 2, derive_rng(seed, "f"))
        orders, angles = geo.enumerate_orders_2d(feats)
        truth = orders[int(derive_rng(seed, "pick").integers(len(orders)))]
        oracle = make_ranking_oracle(truth, NoiseSpec(kind="uniform_flip", eta=0.1),
                                     seed=seed)
        pivot = orders[0]
        est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.25), p=3,
                                         rng=derive_rng(seed, "b"))
        best = geo.geometric_erm_2d(est, feats)
        vals = [est.evaluate_int(o) for o in orders]
        assert est.evaluate_int(best) == min(vals)
        # smallest witness angle wins ties
        first = int(np.flatnonzero(np.array(vals) == min(vals))[0])
        assert best == orders[first]


def test_sampled_directions_erm_beats_nothing():
    n = 9
    feats = geo.random_features(n, 2, derive_rng(8, "f"))
    truth = geo.induced_permutation(np.array([0.3, 1.0]), feats)
    oracle = make_ranking_oracle(truth, NoiseSpec(kind="none"), seed=8)
    pivot = geo.induced_permutation(np.array([1.0, 0.0]), feats)
    est = rk.build_ranking_estimator(pivot, oracle, Params(epsilon=0.25), p=3,
                                     rng=derive_rng(8, "b"))
    found = geo.sampled_directions_erm(est, feats, n_directions=256,
                                       rng=derive_rng(8, "dirs"))
    assert est.evaluate_int(found) <= est.evaluate_int(pivot)


def test_features_roundtrip(tmp_path):
    feats = geo.random_features(5, 3, derive_rng(9, "f"))
    path = str(tmp_path / "feats.csv")
    geo.save_features(feats, path)
    loaded = geo.load_features(path)
    assert np.allclose(loaded.vectors, feats.vectors)
    assert loaded.d == 3


def test_load_features_rejects_missing_items(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("item,x1,x2\n0,0.5,1.0\n2,1.0,0.0\n")
    with pytest.raises(ValueError):
        geo.load_features(str(path))
