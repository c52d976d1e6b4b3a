import numpy as np
import pytest

from indist.weak_learners import (OracleSpec, RegressionTree, candidate_thresholds, constant_tree, enumerate_stumps,
                                  exhaustive_best_tree, fit_tree, predict_tree, random_tree, stump)


def mse(tree, X, y):
    return float(np.mean((tree.predict(X) - y) ** 2))


def test_constant_targets_single_leaf(rng):
    X = rng.random((30, 2))
    t = fit_tree(X, np.full(30, 0.4))
    assert t.root.is_leaf and t.root.value == pytest.approx(0.4)
    assert mse(t, X, np.full(30, 0.4)) == pytest.approx(0.0)
    assert predict_tree(t, [9.0, -3.0]) == pytest.approx(0.4)


def test_routing_strictly_less_goes_left():
    t = stump(0, 0.5, 0.1, 0.9, 1)
    assert predict_tree(t, [0.2]) == 0.1
    assert predict_tree(t, [0.5]) == 0.9


def test_depth_bound_and_range(rng):
    X = rng.random((300, 3))
    y = rng.random(300)
    t = fit_tree(X, y, spec=OracleSpec(max_depth=3, min_leaf=1))
    assert t.depth <= 3
    p = t.predict(rng.normal(size=(100, 3)) * 5)
    assert np.all((p >= 0) & (p <= 1))


def test_mse_non_increasing_in_depth(rng):
    X = rng.random((200, 2))
    y = (X[:, 0] > 0.3).astype(float) * 0.5 + rng.random(200) * 0.5
    errs = [mse(fit_tree(X, y, spec=OracleSpec(max_depth=d, min_leaf=1)), X, y) for d in range(5)]
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


def test_identical_rows_single_leaf():
    X = np.ones((10, 2))
    t = fit_tree(X, np.linspace(0, 1, 10), spec=OracleSpec(max_depth=3, min_leaf=1))
    assert t.root.is_leaf


def test_one_d_matches_exhaustive(rng):
    x = rng.random((40, 1))
    y = rng.random(40)
    g = fit_tree(x, y, spec=OracleSpec(max_depth=1, min_leaf=1))
    e = exhaustive_best_tree(x, y)
    assert g.splits() == e.splits()
    assert mse(g, x, y) == pytest.approx(mse(e, x, y), abs=1e-12)


def test_exhaustive_examples(rng):
    X = rng.random((60, 2))
    assert exhaustive_best_tree(X, np.full(60, 0.3)).root.is_leaf
    y = (X[:, 0] > 0.5).astype(float)
    t = exhaustive_best_tree(X, y)
    (feat, thr), = t.splits()
    assert feat == 0 and abs(thr - 0.5) < 0.1
    assert mse(t, X, y) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        exhaustive_best_tree(X, y, max_depth=2)


def test_greedy_never_beats_exhaustive(rng):
    for _ in range(20):
        X = rng.random((50, 3))
        y = rng.random(50)
        g = fit_tree(X, y, spec=OracleSpec(max_depth=1, min_leaf=1))
        assert mse(g, X, y) >= mse(exhaustive_best_tree(X, y), X, y) - 1e-12


def test_tie_break_lowest_feature():
    X = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], dtype=float)
    t = fit_tree(X, np.array([0, 0, 1, 1.0]), spec=OracleSpec(max_depth=1, min_leaf=1))
    assert t.splits() == [(0, 0.5)]


def test_weights_and_min_leaf(rng):
    X = np.arange(10, dtype=float)[:, None]
    y = np.r_[np.zeros(9), 1.0]
    assert fit_tree(X, y, spec=OracleSpec(max_depth=1, min_leaf=2)).splits() != [(0, 8.5)]
    w = np.r_[np.zeros(5), np.ones(5)]
    t = fit_tree(X, (X[:, 0] > 2).astype(float), weights=w, spec=OracleSpec(max_depth=2, min_leaf=1))
    assert np.all(t.predict(X[5:]) == 1.0)


def test_serialization_round_trip(rng):
    X = rng.random((100, 2))
    t = fit_tree(X, rng.random(100), spec=OracleSpec(max_depth=3, min_leaf=3))
    back = RegressionTree.from_dict(t.to_dict())
    assert np.array_equal(back.predict(X), t.predict(X))
    assert "x" in t.describe()
    assert t.to_json() == back.to_json()


def test_dimension_mismatch(rng):
    t = fit_tree(rng.random((20, 2)), rng.random(20))
    with pytest.raises(ValueError):
        predict_tree(t, [0.1])
    with pytest.raises(ValueError):
        fit_tree(rng.random((20, 2)), rng.random(19))


def test_oracle_spec_validation():
    with pytest.raises(ValueError):
        OracleSpec(max_depth=-1)
    with pytest.raises(ValueError):
        OracleSpec(min_leaf=0)


def test_candidates_and_enumeration():
    assert list(candidate_thresholds(np.array([2.0, 0.0, 2.0, 1.0]))) == [0.5, 1.5]
    X = np.array([[0, 5], [1, 5], [2, 5]], dtype=float)
    assert enumerate_stumps(X) == [(0, 0.5), (0, 1.5)]


def test_random_tree_and_constant(rng):
    X = rng.random((50, 2))
    t = random_tree(rng, X, 2)
    assert t.depth <= 2
    assert np.all((t.predict(X) >= 0) & (t.predict(X) <= 1))
    assert np.all(constant_tree(0.7, 2).predict(X) == 0.7)
