"""Tabular data holding features, outcomes, expert predictions and feedback."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import yaml

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    outcome: np.ndarray
    expert: np.ndarray
    row_ids: np.ndarray
    feedback: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    feedback_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n = X.shape[0]
        y = np.asarray(self.outcome, dtype=float).reshape(-1)
        yh = np.asarray(self.expert, dtype=float).reshape(-1)
        ids = np.asarray(self.row_ids).astype(str)
        if not (len(y) == len(yh) == len(ids) == n):
            raise DataError("features, outcome, expert and row_ids must have equal length")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        for name, v in (("outcome", y), ("expert", yh)):
            if not np.all(np.isfinite(v)) or np.any((v < 0) | (v > 1)):
                raise DataError(f"{name} values must lie in [0, 1]")
        H = None
        if self.feedback is not None:
            H = np.asarray(self.feedback, dtype=float)
            if H.ndim == 1:
                H = H[:, None]
            if H.shape[0] != n or not np.all(np.isfinite(H)):
                raise DataError("feedback must be a finite n x m matrix")
            H.setflags(write=False)
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("feature_names length does not match feature count")
        fb_names = tuple(self.feedback_names)
        if H is not None and not fb_names:
            fb_names = tuple(f"h{j}" for j in range(H.shape[1]))
        for a in (X, y, yh, ids):
            a.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "expert", yh)
        object.__setattr__(self, "row_ids", ids)
        object.__setattr__(self, "feedback", H)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feedback_names", fb_names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            features=self.features[idx],
            outcome=self.outcome[idx],
            expert=self.expert[idx],
            row_ids=self.row_ids[idx],
            feedback=None if self.feedback is None else self.feedback[idx],
            feature_names=self.feature_names,
            feedback_names=self.feedback_names,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        fb_equal = (self.feedback is None and other.feedback is None) or (
            self.feedback is not None
            and other.feedback is not None
            and np.array_equal(self.feedback, other.feedback)
        )
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.outcome, other.outcome)
            and np.array_equal(self.expert, other.expert)
            and np.array_equal(self.row_ids, other.row_ids)
            and fb_equal
            and self.feature_names == other.feature_names
            and self.feedback_names == other.feedback_names
        )


@dataclass(frozen=True)
class Schema:
    """Column roles. ``features=None`` means every column not used elsewhere."""

    outcome: str
    expert: str
    features: Sequence[str] | None = None
    feedback: Sequence[str] = ()
    id: str | None = None
    missing: str = "drop"  # or "error"


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    rows_dropped: int
    dropped_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.train_fraction <= 1):
            raise ConfigError("train_fraction must lie in (0, 1]")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")


def load_dataset(path, schema: Schema, with_report: bool = False):
    """Read a CSV into a validated :class:`Dataset`.

    Rows with a missing cell in any used column are dropped (``schema.missing == "drop"``)
    or rejected. Returns ``(dataset, report)`` when ``with_report`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    dtype = {schema.id: str} if schema.id else None
    df = pd.read_csv(path, float_precision="round_trip", dtype=dtype, encoding="utf-8")
    cols = list(df.columns)
    reserved = [schema.outcome, schema.expert, *schema.feedback] + ([schema.id] if schema.id else [])
    for c in reserved:
        if c not in cols:
            raise DataError(f"unknown column {c!r}; file has {cols}")
    if schema.features is None:
        features = [c for c in cols if c not in reserved]
    else:
        features = list(schema.features)
        for c in features:
            if c not in cols:
                raise DataError(f"unknown column {c!r}; file has {cols}")
    if not features:
        raise DataError("no feature columns")
    used = features + reserved
    if schema.id is None:
        ids = np.array([str(i) for i in range(len(df))])
    else:
        ids = df[schema.id].astype(str).to_numpy()
    missing = df[used].isna().any(axis=1).to_numpy()
    if missing.any():
        if schema.missing == "error":
            raise DataError(f"{int(missing.sum())} rows have missing values")
        logger.warning("dropping %d rows with missing values", int(missing.sum()))
    keep = ~missing
    if not keep.any():
        raise DataError("dataset is empty after dropping rows with missing values")
    sub = df.loc[keep]
    try:
        X = sub[features].to_numpy(dtype=float)
        y = sub[schema.outcome].to_numpy(dtype=float)
        yh = sub[schema.expert].to_numpy(dtype=float)
        H = sub[list(schema.feedback)].to_numpy(dtype=float) if schema.feedback else None
    except (TypeError, ValueError) as exc:
        raise DataError(f"non-numeric value in a used column: {exc}") from exc
    for name, v in ((schema.outcome, y), (schema.expert, yh)):
        bad = ~np.isfinite(v) | (v < 0) | (v > 1)
        if bad.any():
            row = ids[keep][np.argmax(bad)]
            raise DataError(f"column {name!r} out of [0, 1] at row {row}: {v[bad][0]!r}")
    ds = Dataset(
        features=X,
        outcome=y,
        expert=yh,
        row_ids=ids[keep],
        feedback=H,
        feature_names=tuple(features),
        feedback_names=tuple(schema.feedback),
    )
    report = LoadReport(len(df), int(missing.sum()), tuple(ids[missing]))
    return (ds, report) if with_report else ds


def save_dataset(ds: Dataset, path, id_column: str = "row_id",
                 outcome: str = "y", expert: str = "yhat") -> Schema:
    """Write ``ds`` as CSV and return the schema that reads it back unchanged."""
    data = {id_column: ds.row_ids}
    for j, name in enumerate(ds.feature_names):
        data[name] = ds.features[:, j]
    data[outcome] = ds.outcome
    data[expert] = ds.expert
    if ds.feedback is not None:
        for j, name in enumerate(ds.feedback_names):
            data[name] = ds.feedback[:, j]
    pd.DataFrame(data).to_csv(path, index=False, lineterminator="\n")
    return Schema(outcome=outcome, expert=expert, features=list(ds.feature_names),
                  feedback=list(ds.feedback_names), id=id_column)


def split_dataset(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split; the train part gets ``floor(fraction * n)`` rows.

    Row order inside each part follows the original dataset.
    """
    n_train = math.floor(spec.train_fraction * ds.n + 1e-9)
    perm = np.random.default_rng(int(spec.seed)).permutation(ds.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.take(train_idx), ds.take(test_idx)


@dataclass(frozen=True)
class ScoreRuleConfig:
    """Additive integer scoring table.

    ``tables[name]`` is an ascending list of ``(upper, points)`` bins; a value
    falls in the first bin whose inclusive upper bound it does not exceed.
    """

    tables: dict[str, list[tuple[float, int]]]
    min: int
    max: int
    name: str = "score"

    def __post_init__(self):
        if self.min > self.max:
            raise ConfigError("score range min exceeds max")
        for feat, bins in self.tables.items():
            if not bins:
                raise ConfigError(f"empty bin list for {feat!r}")
            uppers = [float(u) for u, _ in bins]
            if any(b <= a for a, b in zip(uppers, uppers[1:])):
                raise ConfigError(f"bin upper bounds for {feat!r} must be strictly ascending")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScoreRuleConfig":
        try:
            lo, hi = raw["range"]
            tables = {}
            for feat, bins in raw["features"].items():
                parsed = []
                for b in bins:
                    upper, points = (b["upper"], b["points"]) if isinstance(b, dict) else b
                    upper = math.inf if upper in (None, "inf", "+inf") else float(upper)
                    parsed.append((upper, int(points)))
                tables[str(feat)] = parsed
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed score rule: {exc}") from exc
        return cls(tables=tables, min=int(lo), max=int(hi), name=str(raw.get("name", "score")))

    @classmethod
    def load(cls, path) -> "ScoreRuleConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"no such score rule file: {path}")
        text = path.read_text(encoding="utf-8")
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "range": [self.min, self.max],
            "features": {
                f: [[None if math.isinf(u) else u, p] for u, p in bins]
                for f, bins in self.tables.items()
            },
        }


def score_rule(ds_or_features, rule: ScoreRuleConfig, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Per-row sum of table points. Accepts a Dataset or a raw feature matrix plus names."""
    if isinstance(ds_or_features, Dataset):
        X, names = ds_or_features.features, list(ds_or_features.feature_names)
    else:
        X = np.atleast_2d(np.asarray(ds_or_features, dtype=float))
        names = list(feature_names or [])
    total = np.zeros(X.shape[0], dtype=np.int64)
    for feat, bins in rule.tables.items():
        if feat not in names:
            raise DataError(f"score rule references unknown feature {feat!r}")
        v = X[:, names.index(feat)]
        uppers = np.array([u for u, _ in bins])
        points = np.array([p for _, p in bins], dtype=np.int64)
        pos = np.searchsorted(uppers, v, side="left")
        if np.any(pos >= len(uppers)):
            bad = v[pos >= len(uppers)][0]
            raise DataError(f"value {bad!r} of {feat!r} is not covered by any bin")
        total += points[pos]
    if total.size and (total.min() < rule.min or total.max() > rule.max):
        raise DataError(
            f"score outside declared range [{rule.min}, {rule.max}]: "
            f"observed [{total.min()}, {total.max()}]"
        )
    return total
