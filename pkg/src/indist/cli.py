"""Command-line pipeline: load, partition, audit, test the expert, fit, policies, report.

Every command writes deterministic CSV/JSON under ``--out`` plus a
``manifest.json`` listing each artifact with its SHA-256 and the hash of the
resolved configuration. Exit codes: 0 success, 1 input/config error,
2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import rng as rng_mod
from .collaborate import (calibrate_feedback, calibration_gap, fit_subset_models, mse_comparison,
                          theorem1_check, theorem2_certificates)
from .dataset import Dataset, Schema, ScoreRuleConfig, SplitSpec, load_dataset, score_rule, split_dataset
from .errors import ConfigError, DataError, IndistError, NumericalError
from .partition import (KINDS, UNSEEN, Partition, audit_partition, boost_multicalibrated, epsilon_net_partition,
                        level_set_partition, observational_partition, unit_interval_edges, unit_score_edges)
from .policy import MAX_CELLS, evaluate_all, frontier_indices
from .stats import bonferroni, bootstrap_ci, classification_metrics, covariance, is_degenerate, mcc, pearson
from .synth import SynthConfig, generate, write_synthetic
from .weak_learners import OracleSpec, fit_tree

logger = logging.getLogger("indist")

EVAL_SPLITS = ("test", "train", "all")
CORRECTIONS = ("none", "bonferroni")


@dataclass
class RunConfig:
    data: str | None = None
    outcome: str = "y"
    expert: str = "yhat"
    features: list[str] | None = None
    feedback: list[str] = field(default_factory=list)
    id_column: str | None = None
    missing: str = "drop"
    train_fraction: float = 0.8
    partition: str = "boosted"
    width: float = 0.1
    min_cell: int = 50
    max_rounds: int = 100
    score_column: str | None = None
    score_rule: str | None = None
    score_range: list[int] | None = None
    metric: str = "euclidean"
    radius: float = 1.0
    max_depth: int = 3
    min_leaf: int = 5
    alpha: float = 0.01
    probes: int = 20
    B: int = 1000
    level: float = 0.95
    correction: str = "none"
    model: str = "linear"
    eval_split: str = "test"
    seed: int = 0
    out: str = "out"
    synth: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.partition not in KINDS:
            raise ConfigError(f"partition must be one of {KINDS}")
        if self.eval_split not in EVAL_SPLITS:
            raise ConfigError(f"eval_split must be one of {EVAL_SPLITS}")
        if self.correction not in CORRECTIONS:
            raise ConfigError(f"correction must be one of {CORRECTIONS}")
        if self.model not in ("mean_only", "linear", "logistic"):
            raise ConfigError("model must be mean_only, linear or logistic")
        if self.missing not in ("drop", "error"):
            raise ConfigError("missing must be drop or error")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        if self.B < 1 or self.probes < 0 or self.min_cell < 1 or self.max_rounds < 1:
            raise ConfigError("B, min_cell and max_rounds must be positive; probes non-negative")
        if not 0 <= int(self.seed) < 2**63:
            raise ConfigError("seed must be a non-negative 63-bit integer")
        try:
            OracleSpec(max_depth=self.max_depth, min_leaf=self.min_leaf)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")  # where results go does not change them
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_file(cls, path) -> dict:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"no such config file: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return raw


# -- output ----------------------------------------------------------------------

def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


class Outputs:
    """Collects artifacts under one directory and writes the manifest last."""

    def __init__(self, out_dir, cfg: RunConfig, command: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.files: dict[str, str] = {}

    def _write(self, name: str, text: str):
        path = self.dir / name
        path.write_text(text, encoding="utf-8", newline="\n")
        self.files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()

    def json(self, name: str, obj):
        self._write(name, json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")

    def csv(self, name: str, rows: list[dict], columns: list[str] | None = None):
        columns = columns or (list(rows[0]) if rows else [])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell_text(r.get(c)) for c in columns])
        self._write(name, buf.getvalue())

    def text(self, name: str, body: str):
        self._write(name, body if body.endswith("\n") else body + "\n")

    def register(self, name: str):
        path = self.dir / name
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def finish(self):
        manifest = {
            "command": self.command,
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.hash(),
            "artifacts": [{"file": k, "sha256": v} for k, v in sorted(self.files.items())],
        }
        (self.dir / "manifest.json").write_text(
            json.dumps(_clean(manifest), sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n")


def format_table(rows: list[dict], columns: list[str]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        return _cell_text(v)

    body = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


# -- pipeline ------------------------------------------------------------------

class Pipeline:
    """Lazily computed stages shared by the commands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._cache: dict = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def oracle(self) -> OracleSpec:
        return OracleSpec(max_depth=self.cfg.max_depth, min_leaf=self.cfg.min_leaf)

    def seed(self, stage: str, index: int = 0) -> int:
        return rng_mod.derive_seed(int(self.cfg.seed), stage, index)

    @property
    def data(self) -> Dataset:
        def load():
            if not self.cfg.data:
                raise ConfigError("no dataset given (set 'data' or pass --data)")
            schema = Schema(outcome=self.cfg.outcome, expert=self.cfg.expert, features=self.cfg.features,
                            feedback=tuple(self.cfg.feedback), id=self.cfg.id_column, missing=self.cfg.missing)
            ds, report = load_dataset(self.cfg.data, schema, with_report=True)
            self._cache["load_report"] = report
            return ds
        return self._get("data", load)

    @property
    def splits(self) -> tuple[Dataset, Dataset]:
        def split():
            spec = SplitSpec(self.cfg.train_fraction, self.seed("split"))
            return split_dataset(self.data, spec)
        return self._get("splits", split)

    @property
    def train(self) -> Dataset:
        return self.splits[0]

    @property
    def evaluation(self) -> Dataset:
        if self.cfg.eval_split == "train":
            return self.train
        if self.cfg.eval_split == "all":
            return self.data
        test = self.splits[1]
        if test.n == 0:
            raise ConfigError("the test split is empty; lower train_fraction or set eval_split")
        return test

    @property
    def booster(self):
        return self._cache.get("booster")

    @property
    def partition(self) -> Partition:
        return self._get("partition", self._build_partition)

    def _build_partition(self) -> Partition:
        cfg, train = self.cfg, self.train
        if cfg.partition == "observational":
            return observational_partition(train)
        if cfg.partition == "epsilon_net":
            return epsilon_net_partition(train, cfg.metric, cfg.radius)
        if cfg.partition == "boosted":
            pred, part = boost_multicalibrated(train, self.oracle, cfg.alpha, unit_interval_edges(cfg.width),
                                               cfg.min_cell, cfg.max_rounds)
            if not pred.converged:
                logger.warning("boosting stopped after %d rounds without converging", cfg.max_rounds)
            self._cache["booster"] = pred
            return part
        # level_set
        if cfg.score_rule:
            rule = ScoreRuleConfig.load(cfg.score_rule)
            scores = score_rule(train, rule).astype(float)
            return level_set_partition(scores, unit_score_edges(rule.min, rule.max), rule=rule,
                                       feature_names=train.feature_names)
        if not cfg.score_column:
            raise ConfigError("level_set partition needs score_column or score_rule")
        if cfg.score_column not in train.feature_names:
            raise ConfigError(f"score column {cfg.score_column!r} is not a feature column")
        j = train.feature_names.index(cfg.score_column)
        scores = train.features[:, j]
        if cfg.score_range:
            edges = unit_score_edges(*cfg.score_range)
        elif np.all(scores == np.round(scores)):
            edges = unit_score_edges(int(scores.min()), int(max(scores.max(), scores.min() + 1)))
        elif scores.min() >= 0 and scores.max() <= 1:
            edges = unit_interval_edges(cfg.width)
        else:
            raise ConfigError("non-integer score outside [0, 1]; set score_range")
        return level_set_partition(scores, edges, score_index=j, feature_names=train.feature_names)

    def labels(self, which: str) -> np.ndarray:
        def compute():
            if which == "train":
                return self.partition.labels
            ds = self.evaluation
            return self.partition.labels if ds is self.train else self.partition.assign_dataset(ds)
        return self._get(("labels", which), compute)

    def audit(self, which: str):
        ds = self.train if which == "train" else self.evaluation
        return self._get(("audit", which), lambda: audit_partition(
            self.partition, ds, self.oracle, self.cfg.probes, self.seed("audit", 0 if which == "train" else 1),
            labels=self.labels(which)))


# -- commands -------------------------------------------------------------------

def _partition_stage(pl: Pipeline, out: Outputs) -> dict:
    part = pl.partition
    out.json("partition.json", part.to_dict(row_ids=pl.train.row_ids))
    audit = pl.audit("train")
    rows = [dict(r, description=part.cells[r["cell"]].description) for r in audit.records()]
    out.csv("audit.csv", rows)
    summary = {"kind": part.kind, "cells": part.K, "train_rows": pl.train.n, "audit_caveat": audit.caveat}
    if pl.booster is not None:
        b = pl.booster
        summary.update(rounds=b.n_rounds, converged=b.converged)
        out.csv("boosting.csv", [{"round": i, "mse": v} for i, v in enumerate(b.mse_history)])
        out.json("booster.json", b.to_dict())
    return summary


def cmd_partition(pl: Pipeline, out: Outputs) -> dict:
    summary = _partition_stage(pl, out)
    out.json("partition_summary.json", summary)
    return summary


def cmd_audit(pl: Pipeline, out: Outputs) -> dict:
    part = pl.partition
    rows = []
    for which in ("train", "eval"):
        for r in pl.audit(which).records():
            rows.append({"split": which, **r, "description": part.cells[r["cell"]].description})
    out.csv("audit_splits.csv", rows)
    summary = {"cells": part.K, "caveat": pl.audit("train").caveat,
               "max_alpha_hat_train": float(pl.audit("train").alpha_hat.max(initial=0.0)),
               "max_alpha_hat_eval": float(pl.audit("eval").alpha_hat.max(initial=0.0))}
    out.json("audit_summary.json", summary)
    return summary


def _binary(v) -> bool:
    return bool(np.all((v == 0) | (v == 1)))


def cmd_test_expert(pl: Pipeline, out: Outputs) -> dict:
    cfg, ds, part = pl.cfg, pl.evaluation, pl.partition
    labels = pl.labels("eval")
    binary = _binary(ds.outcome) and _binary(ds.expert)
    stat_name = "mcc" if binary else "pearson"
    stat = (lambda y, yh: mcc(yh, y)) if binary else (lambda y, yh: pearson(yh, y))
    m = part.K
    alpha_test = bonferroni(1 - cfg.level, m) if cfg.correction == "bonferroni" else 1 - cfg.level
    ci_level = 1 - alpha_test
    rows = []
    for k in range(m):
        idx = np.flatnonzero(labels == k)
        row = {"cell": k, "description": part.cells[k].description, "n": int(idx.size)}
        if idx.size < 2:
            rows.append({**row, "degenerate": True, "significant": False})
            continue
        y, yh = ds.outcome[idx], ds.expert[idx]
        ci = bootstrap_ci(stat, (y, yh), B=cfg.B, level=ci_level, seed=pl.seed("test-expert", k))
        rows.append({**row, stat_name: ci.point, "lo": ci.lo, "hi": ci.hi, "cov": covariance(y, yh),
                     "degenerate": is_degenerate(y, yh), "significant": ci.excludes(0.0),
                     "failed_replicates": ci.missing})
    cols = ["cell", "description", "n", stat_name, "lo", "hi", "cov", "degenerate", "significant",
            "failed_replicates"]
    out.csv("expert_cells.csv", rows, cols)
    meta = {"statistic": stat_name, "cells": m, "level": cfg.level, "correction": cfg.correction,
            "test_alpha": alpha_test, "interval_level": ci_level, "replicates": cfg.B,
            "eval_split": cfg.eval_split, "eval_rows": ds.n, "unseen_rows": int(np.sum(labels == UNSEEN)),
            "significant_cells": [r["cell"] for r in rows if r["significant"]]}
    if binary:
        meta["overall"] = classification_metrics(ds.expert, ds.outcome).with_errors()
    out.json("expert_summary.json", meta)
    return meta


def cmd_fit(pl: Pipeline, out: Outputs) -> dict:
    cfg, train, ev, part = pl.cfg, pl.train, pl.evaluation, pl.partition
    kinds = sorted({"mean_only", "linear", cfg.model})
    models = {k: fit_subset_models(part, train, k, labels=pl.labels("train")) for k in kinds}
    out.json("models.json", {k: m.to_dict() for k, m in models.items()})
    comparator = fit_tree(train.features, train.outcome, spec=pl.oracle)
    out.json("comparator.json", comparator.to_dict())
    checks = {}
    for which, ds in (("train", train), ("eval", ev)):
        chk = theorem1_check(models["linear"], part, ds, comparator, pl.audit(which), labels=pl.labels(which))
        checks[which] = chk
        out.csv(f"mse_bound_{which}.csv", chk.records())
    certs = theorem2_certificates(part, ev, cfg.alpha, B=cfg.B, level=cfg.level, seed=pl.seed("certificate"),
                                  labels=pl.labels("eval"))
    out.csv("certificates.csv", [
        {"cell": c.cell, "size": c.size, "abs_cov": c.abs_cov.point, "lo": c.abs_cov.lo, "hi": c.abs_cov.hi,
         "threshold": c.threshold, "fired": c.fired} for c in certs])
    mse = mse_comparison(models, pl.labels("eval"), ev, B=cfg.B, level=cfg.level, seed=pl.seed("mse"))
    out.csv("mse.csv", [{"model": k, "mse": v.point, "lo": v.lo, "hi": v.hi} for k, v in mse.items()])
    summary = {
        "models": kinds,
        "mse_bound_holds": {w: c.all_hold for w, c in checks.items()},
        "mse_bound_failures": {w: [c.diagnosis for c in chk.cells if not c.holds] for w, chk in checks.items()},
        "certificates_fired": [c.cell for c in certs if c.fired],
        "certificate_threshold": certs[0].threshold if certs else math.sqrt(cfg.alpha / 2),
        "mse": {k: v.point for k, v in mse.items()},
    }
    if ev.feedback is not None:
        labels = pl.labels("eval")
        seen = labels != UNSEEN
        fb = []
        for j, name in enumerate(ev.feedback_names):
            g, y = ev.feedback[seen, j], ev.outcome[seen]
            cal = calibrate_feedback(g, y, labels[seen])
            fb.append({"feedback": name, "mse_raw": float(np.mean((y - g) ** 2)),
                       "mse_calibrated": float(np.mean((y - cal) ** 2)),
                       "gap_raw": calibration_gap(g, y), "gap_calibrated": calibration_gap(cal, y)})
        out.csv("feedback.csv", fb)
        summary["feedback"] = fb
    out.json("fit_summary.json", summary)
    return summary


def cmd_policies(pl: Pipeline, out: Outputs) -> dict:
    part, ds = pl.partition, pl.evaluation
    if part.K > MAX_CELLS:
        raise ConfigError(f"partition has {part.K} cells; policy enumeration supports at most {MAX_CELLS}")
    if not (_binary(ds.outcome) and _binary(ds.expert)):
        raise DataError("policy evaluation needs binary outcome and expert columns")
    table = evaluate_all(part, ds, labels=pl.labels("eval"))
    cols = ["policy", "tpr", "fpr", "automation", "tp", "fp", "tn", "fn"] + [f"cell{k}" for k in range(part.K)]
    out.csv("policies.csv", table.records(), cols)
    front = frontier_indices(table)
    out.csv("frontier.csv", table.records(front), cols)
    summary = {"cells": part.K, "evaluated": int(len(table.actions)), "frontier": int(front.size),
               "eval_split": pl.cfg.eval_split, "unseen_rows_deferred": int(np.sum(pl.labels("eval") == UNSEEN))}
    out.json("policies_summary.json", summary)
    return summary


def cmd_synth(pl: Pipeline, out: Outputs) -> dict:
    opts = dict(pl.cfg.synth)
    opts.setdefault("seed", int(pl.cfg.seed))
    cfg = SynthConfig.from_dict(opts)
    ds, truth = generate(cfg)
    sidecar = write_synthetic(ds, truth, cfg, out.dir / "data.csv")
    out.register("data.csv")
    out.register(sidecar.name)
    summary = {"rows": ds.n, "planted_cells": truth.planted.K, "informed": list(truth.informed), "mcc": truth.mcc}
    out.json("synth_summary.json", summary)
    return summary


def cmd_report(pl: Pipeline, out: Outputs) -> dict:
    parts = {"partition": _partition_stage(pl, out), "expert": cmd_test_expert(pl, out), "fit": cmd_fit(pl, out)}
    if pl.partition.K <= MAX_CELLS and _binary(pl.evaluation.outcome) and _binary(pl.evaluation.expert):
        parts["policies"] = cmd_policies(pl, out)
    lines = [f"partition: {parts['partition']['kind']}, {pl.partition.K} cells, {pl.train.n} training rows", ""]
    lines += ["audit (training split)", format_table(pl.audit("train").records(),
                                                     ["cell", "size", "alpha_hat", "var_bound", "mse_gap"]), ""]
    ex = json.loads((out.dir / "expert_summary.json").read_text())
    lines += [f"expert per cell ({ex['statistic']}, interval level {ex['interval_level']:.4g})"]
    lines += [_csv_table(out.dir / "expert_cells.csv", ["cell", "n", ex["statistic"], "lo", "hi", "significant"]), ""]
    lines += ["certificates", _csv_table(out.dir / "certificates.csv", ["cell", "size", "abs_cov", "lo", "threshold",
                                                                        "fired"]), ""]
    lines += ["held-out squared error", _csv_table(out.dir / "mse.csv", ["model", "mse", "lo", "hi"]), ""]
    if "policies" in parts:
        p = parts["policies"]
        lines += [f"policies: {p['evaluated']} evaluated, {p['frontier']} on the frontier"]
    out.text("report.txt", "\n".join(lines))
    out.json("summary.json", parts)
    return parts


def _csv_table(path: Path, cols: list[str]) -> str:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    conv = []
    for r in rows:
        d = {}
        for c in cols:
            v = r.get(c, "")
            try:
                d[c] = float(v) if c not in ("cell", "n", "size") else int(v)
            except ValueError:
                d[c] = v
        conv.append(d)
    return format_table(conv, cols)


COMMANDS = {
    "partition": cmd_partition,
    "audit": cmd_audit,
    "test-expert": cmd_test_expert,
    "fit": cmd_fit,
    "policies": cmd_policies,
    "synth": cmd_synth,
    "report": cmd_report,
}


# -- argument parsing ------------------------------------------------------------

def _csv_list(s: str) -> list[str]:
    return [x for x in s.split(",") if x]


def _int_list(s: str) -> list[int]:
    return [int(x) for x in _csv_list(s)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file of RunConfig fields")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("-v", "--verbose", action="store_true")
    g = common.add_argument_group("data")
    g.add_argument("--data", help="input CSV")
    g.add_argument("--outcome")
    g.add_argument("--expert")
    g.add_argument("--features", type=_csv_list, help="comma-separated feature columns")
    g.add_argument("--feedback", type=_csv_list, help="comma-separated feedback columns")
    g.add_argument("--id-column", dest="id_column")
    g.add_argument("--missing", choices=("drop", "error"))
    g.add_argument("--train-fraction", dest="train_fraction", type=float)
    g.add_argument("--eval-split", dest="eval_split", choices=EVAL_SPLITS)
    g = common.add_argument_group("partition")
    g.add_argument("--partition", choices=KINDS)
    g.add_argument("--width", type=float)
    g.add_argument("--min-cell", dest="min_cell", type=int)
    g.add_argument("--max-rounds", dest="max_rounds", type=int)
    g.add_argument("--score-column", dest="score_column")
    g.add_argument("--score-rule", dest="score_rule")
    g.add_argument("--score-range", dest="score_range", type=_int_list, help="lo,hi")
    g.add_argument("--metric", choices=("euclidean", "hamming"))
    g.add_argument("--radius", type=float)
    g.add_argument("--max-depth", dest="max_depth", type=int)
    g.add_argument("--min-leaf", dest="min_leaf", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--probes", type=int)
    g = common.add_argument_group("inference")
    g.add_argument("--B", "--replicates", dest="B", type=int)
    g.add_argument("--level", type=float)
    g.add_argument("--correction", choices=CORRECTIONS)
    g.add_argument("--model", choices=("mean_only", "linear", "logistic"))
    g = common.add_argument_group("synth")
    g.add_argument("--n", type=int)
    g.add_argument("--cardinalities", type=_int_list)
    g.add_argument("--structure")
    g.add_argument("--strength", dest="side_info_strength", type=float)
    g.add_argument("--noise", dest="expert_noise", type=float)
    g.add_argument("--synth-expert", dest="synth_expert", choices=("side_info", "outcome"))

    parser = argparse.ArgumentParser(prog="indist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return parser


_SYNTH_FLAGS = {"n": "n", "cardinalities": "cardinalities", "structure": "structure",
                "side_info_strength": "side_info_strength", "expert_noise": "expert_noise",
                "synth_expert": "expert"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = RunConfig().to_dict()
    if args.config:
        raw = RunConfig.from_file(args.config)
        values.update(raw)
    flags = vars(args)
    synth = dict(values.get("synth") or {})
    for flag, key in _SYNTH_FLAGS.items():
        if flags.get(flag) is not None:
            synth[key] = flags[flag]
    values["synth"] = synth
    for f in fields(RunConfig):
        if f.name != "synth" and flags.get(f.name) is not None:
            values[f.name] = flags[f.name]
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        out = Outputs(cfg.out, cfg, args.command)
        COMMANDS[args.command](Pipeline(cfg), out)
        out.finish()
    except NumericalError as exc:
        print(f"error: numerical failure in stage {exc.stage}: {exc}", file=sys.stderr)
        return 2
    except (IndistError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
