import csv
import json

import numpy as np
import pytest

from indist.cli import RunConfig, main
from indist.synth import SynthConfig, generate, write_synthetic


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    cfg = SynthConfig(n=3000, seed=21)
    ds, truth = generate(cfg)
    write_synthetic(ds, truth, cfg, d / "s.csv")
    return d / "s.csv"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*args):
    return main([str(a) for a in args])


def base_args(data, out):
    return ["--data", data, "--id-column", "row_id", "--out", out, "--B", 100, "--max-depth", 1]


def test_partition_boosted(synth_csv, tmp_path):
    assert run("partition", *base_args(synth_csv, tmp_path)) == 0
    part = json.loads((tmp_path / "partition.json").read_text())
    audit = rows(tmp_path / "audit.csv")
    assert len(audit) == part["n_cells"] >= 1
    man = json.loads((tmp_path / "manifest.json").read_text())
    names = {a["file"] for a in man["artifacts"]}
    assert {"partition.json", "audit.csv", "booster.json"} <= names
    assert len(man["config_hash"]) == 64


def test_observational_three_rows(tmp_path):
    (tmp_path / "d.csv").write_text("x0,x1,y,yhat\n0,0,1,1\n0,1,0,0\n1,1,1,0\n")
    assert run("partition", "--data", tmp_path / "d.csv", "--partition", "observational",
               "--train-fraction", 1.0, "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "partition.json").read_text())["n_cells"] == 3


def test_level_set_integer_column(tmp_path, rng):
    n = 300
    s = rng.integers(0, 6, n)
    text = "score,y,yhat\n" + "".join(f"{a},{b},{c}\n" for a, b, c in
                                      zip(s, rng.integers(0, 2, n), rng.integers(0, 2, n)))
    (tmp_path / "d.csv").write_text(text)
    assert run("partition", "--data", tmp_path / "d.csv", "--partition", "level_set", "--score-column", "score",
               "--score-range", "0,23", "--train-fraction", 1.0, "--out", tmp_path / "o") == 0
    part = json.loads((tmp_path / "o" / "partition.json").read_text())
    assert part["n_cells"] == len(np.unique(s))


def test_level_set_score_rule(tmp_path, rng):
    n = 200
    a, b = rng.integers(0, 3, n), rng.integers(0, 2, n)
    (tmp_path / "d.csv").write_text("a,b,y,yhat\n" + "".join(
        f"{i},{j},{k},{k}\n" for i, j, k in zip(a, b, rng.integers(0, 2, n))))
    (tmp_path / "rule.yaml").write_text("range: [0, 5]\nfeatures:\n  a: [[0, 0], [1, 1], [2, 3]]\n"
                                        "  b: [[0, 0], [1, 2]]\n")
    assert run("partition", "--data", tmp_path / "d.csv", "--partition", "level_set",
               "--score-rule", tmp_path / "rule.yaml", "--out", tmp_path / "o") == 0


def test_expert_equals_outcome(tmp_path):
    cfg = SynthConfig(n=2000, seed=3, expert="outcome", expert_noise=0.0)
    ds, truth = generate(cfg)
    write_synthetic(ds, truth, cfg, tmp_path / "s.csv")
    assert run("test-expert", *base_args(tmp_path / "s.csv", tmp_path / "o")) == 0
    cells = rows(tmp_path / "o" / "expert_cells.csv")
    assert cells and all(float(r["mcc"]) == pytest.approx(1.0) for r in cells)


def test_bonferroni_metadata(tmp_path, rng):
    n = 700
    x = np.repeat(np.arange(7), 100)
    (tmp_path / "d.csv").write_text("x,y,yhat\n" + "".join(
        f"{a},{b},{c}\n" for a, b, c in zip(x, rng.integers(0, 2, n), rng.integers(0, 2, n))))
    assert run("test-expert", "--data", tmp_path / "d.csv", "--partition", "observational", "--correction",
               "bonferroni", "--eval-split", "all", "--B", 50, "--out", tmp_path / "o") == 0
    meta = json.loads((tmp_path / "o" / "expert_summary.json").read_text())
    assert meta["cells"] == 7 and meta["test_alpha"] == pytest.approx(0.05 / 7)


def test_side_information_significant(tmp_path):
    cfg = SynthConfig(n=10000, seed=0, side_info_strength=0.5)
    ds, truth = generate(cfg)
    write_synthetic(ds, truth, cfg, tmp_path / "s.csv")
    assert run("test-expert", *base_args(tmp_path / "s.csv", tmp_path / "o")) == 0
    meta = json.loads((tmp_path / "o" / "expert_summary.json").read_text())
    assert meta["significant_cells"]


def test_fit_outputs(synth_csv, tmp_path):
    assert run("fit", *base_args(synth_csv, tmp_path)) == 0
    summary = json.loads((tmp_path / "fit_summary.json").read_text())
    assert summary["mse_bound_holds"]["train"]
    assert set(summary["mse"]) == {"linear", "mean_only"}
    models = json.loads((tmp_path / "models.json").read_text())
    assert models["linear"]["kind"] == "linear"
    for name in ("mse_bound_train.csv", "mse_bound_eval.csv", "certificates.csv", "mse.csv"):
        assert (tmp_path / name).exists()


def test_fit_with_feedback(tmp_path, rng):
    n = 600
    x = rng.integers(0, 3, n)
    y = rng.integers(0, 2, n)
    h = np.clip(0.2 + 0.5 * y + 0.1 * rng.random(n), 0, 1)
    (tmp_path / "d.csv").write_text("x,y,yhat,h\n" + "".join(
        f"{a},{b},{b},{float(c)!r}\n" for a, b, c in zip(x, y, h)))
    assert run("fit", "--data", tmp_path / "d.csv", "--feedback", "h", "--partition", "observational",
               "--B", 50, "--out", tmp_path / "o") == 0
    fb = rows(tmp_path / "o" / "feedback.csv")
    assert float(fb[0]["mse_calibrated"]) <= float(fb[0]["mse_raw"])


def test_policies_k7_and_k1(tmp_path):
    cfg = SynthConfig(n=3000, seed=5, structure="additive", cardinalities=(7, 2))
    ds, truth = generate(cfg)
    write_synthetic(ds, truth, cfg, tmp_path / "s.csv")
    assert run("policies", "--data", tmp_path / "s.csv", "--id-column", "row_id", "--partition", "level_set",
               "--score-column", "x0", "--out", tmp_path / "a") == 0
    assert len(rows(tmp_path / "a" / "policies.csv")) == 2187
    assert (tmp_path / "a" / "frontier.csv").exists()
    (tmp_path / "one.csv").write_text("x,y,yhat\n" + "".join(f"0,{i % 2},{(i // 2) % 2}\n" for i in range(50)))
    assert run("policies", "--data", tmp_path / "one.csv", "--partition", "observational", "--out",
               tmp_path / "b") == 0
    assert len(rows(tmp_path / "b" / "policies.csv")) == 3
    front = rows(tmp_path / "b" / "frontier.csv")
    assert 1 <= len(front) <= 3


def test_frontier_file_passes_recheck(synth_csv, tmp_path):
    assert run("policies", *base_args(synth_csv, tmp_path)) == 0
    front = rows(tmp_path / "frontier.csv")
    pts = [(float(r["tpr"]), float(r["fpr"]), float(r["automation"])) for r in front]
    for i, (t, f, a) in enumerate(pts):
        for j, (t2, f2, a2) in enumerate(pts):
            if i != j:
                assert not (t2 >= t and f2 <= f and a2 >= a and (t2 > t or f2 < f or a2 > a))


def test_report_and_synth(tmp_path):
    assert run("synth", "--out", tmp_path / "s", "--n", 1500, "--seed", 4, "--structure", "additive") == 0
    assert (tmp_path / "s" / "data.truth.json").exists()
    assert run("report", *base_args(tmp_path / "s" / "data.csv", tmp_path / "r")) == 0
    text = (tmp_path / "r" / "report.txt").read_text()
    assert "certificates" in text and "audit" in text
    assert run("audit", *base_args(tmp_path / "s" / "data.csv", tmp_path / "a")) == 0


def test_config_file_and_flag_precedence(synth_csv, tmp_path):
    (tmp_path / "c.yaml").write_text(f"data: {synth_csv}\nid_column: row_id\nalpha: 0.05\nB: 50\nmax_depth: 1\n")
    assert run("partition", "--config", tmp_path / "c.yaml", "--alpha", 0.02, "--out", tmp_path / "o") == 0
    cfg = json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]
    assert cfg["alpha"] == 0.02 and cfg["B"] == 50


def test_exit_codes(tmp_path, synth_csv, capsys):
    assert run("partition", "--data", tmp_path / "missing.csv", "--out", tmp_path / "o") == 1
    (tmp_path / "bad.csv").write_text("x,y,yhat\n0,2,1\n")
    assert run("partition", "--data", tmp_path / "bad.csv", "--out", tmp_path / "o") == 1
    (tmp_path / "c.yaml").write_text("nonsense_key: 1\n")
    assert run("partition", "--config", tmp_path / "c.yaml", "--out", tmp_path / "o") == 1
    assert run("fit", *base_args(synth_csv, tmp_path / "o"), "--alpha", 2.0) == 1
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exit_code(synth_csv, tmp_path, monkeypatch, capsys):
    import indist.cli as cli
    from indist.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("bootstrap", "statistic undefined on every replicate")

    monkeypatch.setattr(cli, "bootstrap_ci", boom)
    assert run("test-expert", *base_args(synth_csv, tmp_path)) == 2
    assert "stage bootstrap" in capsys.readouterr().err


def test_run_config_hash_ignores_out():
    a, b = RunConfig(out="x"), RunConfig(out="y")
    assert a.hash() == b.hash()
    assert RunConfig(alpha=0.02).hash() != a.hash()
