import numpy as np
import pytest

from conftest import make_ds
from indist.errors import ConfigError
from indist.partition import observational_partition
from indist.policy import (ADMIT, DEFER, DISCHARGE, Policy, enumerate_policies, evaluate_all, evaluate_policy,
                           frontier_indices, pareto_frontier, pareto_mask)
from indist.stats import ConfusionCounts, classification_metrics


def dominated_brute(points):
    """Pure-Python quadratic scan; None counts as a tie on that axis."""
    keep = []
    for i, (ti, fi, ai) in enumerate(points):
        dom = False
        for j, (tj, fj, aj) in enumerate(points):
            if i == j:
                continue
            t_ge = ti is None or tj is None or tj >= ti
            t_gt = ti is not None and tj is not None and tj > ti
            f_le = fi is None or fj is None or fj <= fi
            f_lt = fi is not None and fj is not None and fj < fi
            if t_ge and f_le and aj >= ai and (t_gt or f_lt or aj > ai):
                dom = True
                break
        keep.append(not dom)
    return keep


def cells_ds(rng, K=3, n=600):
    X = rng.integers(0, K, size=(n, 1)).astype(float)
    y = rng.integers(0, 2, n)
    yh = np.where(rng.random(n) < 0.7, y, 1 - y)
    ds = make_ds(X, y, yh)
    return ds, observational_partition(ds)


def test_enumeration_counts_and_order():
    assert len(enumerate_policies(7)) == 2187
    assert len(enumerate_policies(1)) == 3
    assert enumerate_policies(0) == [Policy(())]
    pols = enumerate_policies(2)
    assert [p.actions for p in pols[:4]] == [(0, 0), (1, 0), (2, 0), (0, 1)]
    with pytest.raises(ConfigError, match="sample"):
        enumerate_policies(14)


def test_trivial_policies(rng):
    ds, p = cells_ds(rng)
    defer = evaluate_policy(Policy((DEFER,) * 3), p, ds)
    ref = classification_metrics(ds.expert, ds.outcome)
    assert defer.tpr == ref.sensitivity and defer.fpr == ref.fpr and defer.automation == 0
    admit = evaluate_policy(Policy((ADMIT,) * 3), p, ds)
    assert (admit.tpr, admit.fpr, admit.automation) == (1.0, 1.0, 1.0)
    dis = evaluate_policy(Policy((DISCHARGE,) * 3), p, ds)
    assert (dis.tpr, dis.fpr) == (0.0, 0.0)
    assert sum((c for c in admit.cell_counts), ConfusionCounts(0, 0, 0, 0)).n == ds.n
    with pytest.raises(ValueError):
        evaluate_policy(Policy((ADMIT,)), p, ds)


def test_automation_is_weighted_fraction(rng):
    ds, p = cells_ds(rng)
    e = evaluate_policy(Policy((ADMIT, DEFER, DISCHARGE)), p, ds)
    sizes = p.sizes()
    assert e.automation == pytest.approx((sizes[0] + sizes[2]) / ds.n)


def test_unseen_rows_deferred(rng):
    ds, p = cells_ds(rng, K=2)
    test = make_ds(np.array([[5.0], [0.0]]), [1, 0], [1, 1])
    e = evaluate_policy(Policy((DISCHARGE, DISCHARGE)), p, test)
    assert e.counts == ConfusionCounts(tp=1, fp=0, tn=1, fn=0)
    assert e.automation == 0.5


def test_vectorised_matches_rowwise(rng):
    ds, p = cells_ds(rng, K=4)
    table = evaluate_all(p, ds)
    for i, pol in enumerate(enumerate_policies(4)):
        e = evaluate_policy(pol, p, ds)
        assert tuple(table.counts[i]) == (e.counts.tp, e.counts.fp, e.counts.tn, e.counts.fn)
        assert table.automation[i] == pytest.approx(e.automation, abs=1e-15)


def test_frontier_examples():
    e = lambda t, f, a: (Policy(()), type("E", (), {"tpr": t, "fpr": f, "automation": a})())
    single = [e(0.5, 0.5, 0.5)]
    assert pareto_frontier(single) == single
    a, b = e(0.9, 0.2, 0.5), e(0.8, 0.2, 0.5)
    assert pareto_frontier([b, a]) == [a]
    dup = [e(0.5, 0.5, 0.5), e(0.5, 0.5, 0.5)]
    assert pareto_frontier(dup) == dup
    with pytest.raises(ValueError):
        pareto_frontier([])


def test_undefined_tpr_is_tie():
    m = pareto_mask(np.array([np.nan, 0.5]), np.array([0.2, 0.2]), np.array([0.5, 0.4]))
    assert list(m) == [True, False]


def test_frontier_matches_brute(rng):
    ds, p = cells_ds(rng, K=5, n=400)
    table = evaluate_all(p, ds)
    pts = [(r["tpr"], r["fpr"], r["automation"]) for r in table.records()]
    assert list(pareto_mask(table.tpr, table.fpr, table.automation)) == dominated_brute(pts)
    front = frontier_indices(table)
    sub = [pts[i] for i in front]
    assert all(dominated_brute(sub))


def test_all_admit_not_dominated_on_tpr_automation(rng):
    ds, p = cells_ds(rng, K=3)
    table = evaluate_all(p, ds)
    i = 0  # all-Admit is code 0
    t, a = table.tpr, table.automation
    assert not np.any((t >= t[i]) & (a >= a[i]) & ((t > t[i]) | (a > a[i])))
