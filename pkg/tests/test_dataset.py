import numpy as np
import pytest

from conftest import make_ds
from indist.dataset import (Dataset, Schema, ScoreRuleConfig, SplitSpec, load_dataset, save_dataset, score_rule,
                            split_dataset)
from indist.errors import ConfigError, DataError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    p = write(tmp_path, "x0,x1,y,yhat\n0,1,0,1\n1,1,1,1\n2,0,0,0\n")
    ds = load_dataset(p, Schema(outcome="y", expert="yhat"))
    assert (ds.n, ds.d) == (3, 2)
    assert ds.feature_names == ("x0", "x1")
    assert list(ds.row_ids) == ["0", "1", "2"]


def test_out_of_range_outcome(tmp_path):
    p = write(tmp_path, "x0,y,yhat\n0,2.0,1\n")
    with pytest.raises(DataError, match="out of"):
        load_dataset(p, Schema(outcome="y", expert="yhat"))


def test_missing_file_and_unknown_column(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope.csv", Schema(outcome="y", expert="yhat"))
    p = write(tmp_path, "x0,y,yhat\n0,1,1\n")
    with pytest.raises(DataError, match="unknown column"):
        load_dataset(p, Schema(outcome="label", expert="yhat"))


def test_missing_rows_dropped_or_rejected(tmp_path):
    p = write(tmp_path, "id,x0,y,yhat\na,0,1,1\nb,,1,0\nc,1,0,0\n")
    ds, rep = load_dataset(p, Schema(outcome="y", expert="yhat", id="id"), with_report=True)
    assert ds.n == 2 and rep.rows_dropped == 1 and rep.dropped_ids == ("b",)
    with pytest.raises(DataError):
        load_dataset(p, Schema(outcome="y", expert="yhat", id="id", missing="error"))


def test_empty_after_filter(tmp_path):
    p = write(tmp_path, "x0,y,yhat\n,1,1\n")
    with pytest.raises(DataError, match="empty"):
        load_dataset(p, Schema(outcome="y", expert="yhat"))


def test_triage_shaped_file(tmp_path, rng):
    n = 3617
    X = rng.integers(0, 4, size=(n, 9))
    ds = make_ds(X, rng.integers(0, 2, n), rng.integers(0, 2, n))
    schema = save_dataset(ds, tmp_path / "t.csv")
    back = load_dataset(tmp_path / "t.csv", schema)
    assert (back.n, back.d) == (3617, 9)
    train, test = split_dataset(back, SplitSpec(0.8, seed=5))
    assert (train.n, test.n) == (2893, 724)


def test_round_trip_with_feedback(tmp_path, rng):
    n = 40
    ds = make_ds(rng.random((n, 3)), rng.random(n), rng.random(n), feedback=rng.normal(size=(n, 2)))
    schema = save_dataset(ds, tmp_path / "r.csv")
    assert load_dataset(tmp_path / "r.csv", schema) == ds


def test_split_properties(rng):
    ds = make_ds(rng.random((101, 2)), rng.integers(0, 2, 101))
    tr, te = split_dataset(ds, SplitSpec(0.8, 3))
    assert tr.n == 80 and te.n == 21
    assert not set(tr.row_ids) & set(te.row_ids)
    assert sorted(map(int, np.concatenate([tr.row_ids, te.row_ids]))) == list(range(101))
    tr2, _ = split_dataset(ds, SplitSpec(0.8, 3))
    assert np.array_equal(tr.row_ids, tr2.row_ids)
    full, empty = split_dataset(ds, SplitSpec(1.0, 0))
    assert full.n == 101 and empty.n == 0


@pytest.mark.parametrize("frac", [0.0, 1.5, -0.1])
def test_split_spec_rejects(frac):
    with pytest.raises(ConfigError):
        SplitSpec(frac)


def test_dataset_immutable(rng):
    ds = make_ds(rng.random((5, 1)), rng.integers(0, 2, 5))
    with pytest.raises(ValueError):
        ds.outcome[0] = 0.5


def test_score_rule_examples():
    X = np.array([[0.0], [1.0]])
    zero = ScoreRuleConfig({"a": [(0, 0), (1, 0)]}, 0, 23)
    assert list(score_rule(X, zero, ["a"])) == [0, 0]
    rule = ScoreRuleConfig({"a": [(0, 0), (1, 3)]}, 0, 23)
    assert list(score_rule(X, rule, ["a"])) == [0, 3]
    big = ScoreRuleConfig({"a": [(0, 0), (1, 24)]}, 0, 23)
    with pytest.raises(DataError, match="range"):
        score_rule(X, big, ["a"])
    with pytest.raises(DataError, match="not covered"):
        score_rule(np.array([[2.0]]), rule, ["a"])


def test_score_rule_from_yaml(tmp_path):
    p = write(tmp_path, "name: toy\nrange: [0, 5]\nfeatures:\n  a: [[1, 0], [inf, 2]]\n  b:\n"
                        "    - {upper: 0, points: 0}\n    - {upper: null, points: 3}\n", "rule.yaml")
    rule = ScoreRuleConfig.load(p)
    X = np.array([[0.0, 0.0], [5.0, 1.0]])
    assert list(score_rule(X, rule, ["a", "b"])) == [0, 5]
    assert ScoreRuleConfig.from_dict(rule.to_dict()) == rule


def test_score_rule_monotone(rng):
    X = rng.integers(0, 3, size=(50, 2)).astype(float)
    base = ScoreRuleConfig({"a": [(0, 0), (1, 1), (2, 2)], "b": [(0, 0), (2, 1)]}, 0, 10)
    bumped = ScoreRuleConfig({"a": [(0, 0), (1, 3), (2, 2)], "b": [(0, 1), (2, 1)]}, 0, 10)
    assert np.all(score_rule(X, bumped, ["a", "b"]) >= score_rule(X, base, ["a", "b"]))


def test_score_rule_config_validation():
    with pytest.raises(ConfigError):
        ScoreRuleConfig({"a": [(1, 0), (0, 1)]}, 0, 1)
    with pytest.raises(ConfigError):
        ScoreRuleConfig.from_dict({"features": {}})


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), [0, 1], [0, 1.5], ["a", "b"])
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), [0, 1], [0], ["a", "b"])
