"""Seeded synthetic data with a latent side channel and exact ground-truth moments.

Features are uniform categorical, ``U`` is a fair coin the expert may see but
the features do not encode, and

    p(x, u) = clamp(base(x) + strength * (u - 1/2) * scale),   Y ~ Bernoulli(p).

Because every input is discrete, per-cell moments are finite sums over the
generative table rather than Monte-Carlo estimates.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, save_dataset
from .errors import ConfigError
from .partition import LookupRouter, Partition, _from_labels

STRUCTURES = ("planted_stump", "additive", "conditional_independence")
EXPERTS = ("side_info", "outcome")
_LOW, _HIGH = 0.3, 0.7


@dataclass(frozen=True)
class SynthConfig:
    n: int = 5000
    cardinalities: tuple[int, ...] = (4, 3)
    side_info_strength: float = 0.5
    expert_noise: float = 0.05
    structure: str = "planted_stump"
    seed: int = 0
    scale: float = 0.5
    expert: str = "side_info"  # or "outcome": the expert reports Y itself
    informed_cells: tuple[int, ...] | None = None  # default: the last planted cell

    def __post_init__(self):
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if self.informed_cells is not None:
            object.__setattr__(self, "informed_cells", tuple(int(c) for c in self.informed_cells))
        if self.n < 1:
            raise ConfigError("n must be positive")
        if not self.cardinalities or any(c < 2 for c in self.cardinalities):
            raise ConfigError("need at least one feature and every cardinality must be >= 2")
        if self.structure not in STRUCTURES:
            raise ConfigError(f"structure must be one of {STRUCTURES}")
        if self.expert not in EXPERTS:
            raise ConfigError(f"expert must be one of {EXPERTS}")
        for name in ("side_info_strength", "expert_noise", "scale"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cardinalities"] = list(self.cardinalities)
        if self.informed_cells is not None:
            d["informed_cells"] = list(self.informed_cells)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown synth options: {sorted(extra)}")
        d = dict(d)
        if "cardinalities" in d:
            d["cardinalities"] = tuple(d["cardinalities"])
        if d.get("informed_cells") is not None:
            d["informed_cells"] = tuple(d["informed_cells"])
        return cls(**d)


@dataclass
class GroundTruth:
    p: np.ndarray  # per-row E[Y | X, U]
    u: np.ndarray
    planted_labels: np.ndarray
    planted: Partition
    cell_base: np.ndarray
    cell_cov: np.ndarray  # exact Cov(Y, Yhat | planted cell)
    cell_prob: np.ndarray  # P(planted cell)
    informed: tuple[int, ...]
    mcc: float  # exact MCC(Yhat, Y) over the whole population
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "cells": [
                {"cell": k, "base": float(self.cell_base[k]), "probability": float(self.cell_prob[k]),
                 "cov_y_yhat": float(self.cell_cov[k]), "informed": k in self.informed,
                 "description": self.planted.cells[k].description}
                for k in range(self.planted.K)
            ],
            "mcc": self.mcc,
        }


def _base(cfg: SynthConfig, X: np.ndarray) -> np.ndarray:
    if cfg.structure == "additive":
        scaled = X / (np.asarray(cfg.cardinalities, dtype=float) - 1)
        return _LOW + (_HIGH - _LOW) * scaled.mean(axis=1)
    c0 = cfg.cardinalities[0]
    return np.where(X[:, 0] < c0 / 2, _LOW, _HIGH)


def _grid(cfg: SynthConfig) -> np.ndarray:
    return np.array(list(itertools.product(*[range(c) for c in cfg.cardinalities])), dtype=float)


def _prob(cfg, base, u):
    # rounding keeps table values such as 0.3 - 0.25 exactly at 0.05
    return np.clip(np.round(base + cfg.side_info_strength * (u - 0.5) * cfg.scale, 12), 0.0, 1.0)


def _planted(cfg: SynthConfig):
    """Planted cells are the level sets of base(x), ordered by base value."""
    grid = _grid(cfg)
    base = np.round(_base(cfg, grid), 12)
    levels = np.unique(base)
    cell_of = np.searchsorted(levels, base)
    return grid, levels, cell_of


def _informed(cfg: SynthConfig, K: int) -> tuple[int, ...]:
    if cfg.structure == "conditional_independence" or cfg.expert != "side_info":
        return ()
    cells = (K - 1,) if cfg.informed_cells is None else cfg.informed_cells
    if any(not 0 <= c < K for c in cells):
        raise ConfigError(f"informed cell index out of range for {K} planted cells")
    return tuple(sorted(set(cells)))


def _raw_expert(cfg, base, u, informed_mask):
    # informed cells: expert reports the latent bit; elsewhere it thresholds the base risk
    return np.where(informed_mask, u, (base >= 0.5).astype(float))


def _exact_moments(cfg, grid, levels, cell_of, informed):
    """Per-cell Cov(Y, Yhat) and overall MCC summed over (x, u) with equal weights."""
    e = cfg.expert_noise
    rows = []
    for u in (0.0, 1.0):
        base = levels[cell_of]
        p = _prob(cfg, base, u)
        if cfg.expert == "outcome":
            eyh = p * (1 - e) + (1 - p) * e
            eyyh = p * (1 - e)
        else:
            raw = _raw_expert(cfg, base, np.full(base.size, u), np.isin(cell_of, informed))
            eyh = raw * (1 - e) + (1 - raw) * e
            eyyh = p * eyh  # Y and the noisy expert are independent given (x, u)
        rows.append((p, eyh, eyyh))
    p = np.concatenate([r[0] for r in rows])
    q = np.concatenate([r[1] for r in rows])
    pq = np.concatenate([r[2] for r in rows])
    cells = np.concatenate([cell_of, cell_of])
    K = levels.size
    cov = np.zeros(K)
    prob = np.zeros(K)
    for k in range(K):
        m = cells == k
        cov[k] = pq[m].mean() - p[m].mean() * q[m].mean()
        prob[k] = m.mean()
    c = pq.mean() - p.mean() * q.mean()
    vy = p.mean() * (1 - p.mean())
    vq = q.mean() * (1 - q.mean())
    mcc = float(c / np.sqrt(vy * vq)) if vy > 0 and vq > 0 else 0.0
    return cov, prob, mcc


def generate(cfg: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Draw a dataset; the result is a pure function of ``cfg``."""
    rng = np.random.default_rng(int(cfg.seed))
    X = np.column_stack([rng.integers(0, c, size=cfg.n) for c in cfg.cardinalities]).astype(float)
    u = rng.integers(0, 2, size=cfg.n).astype(float)
    grid, levels, cell_of = _planted(cfg)
    K = levels.size
    informed = _informed(cfg, K)
    table = {tuple(row): int(k) for row, k in zip(grid.tolist(), cell_of)}
    router = LookupRouter(table)
    labels = router.route(X)
    base = levels[labels]
    p = _prob(cfg, base, u)
    y = (rng.random(cfg.n) < p).astype(float)
    if cfg.expert == "outcome":
        raw = y
    else:
        raw = _raw_expert(cfg, base, u, np.isin(labels, informed))
    flip = rng.random(cfg.n) < cfg.expert_noise
    yhat = np.where(flip, 1 - raw, raw)

    names = tuple(f"x{j}" for j in range(cfg.d))
    ds = Dataset(features=X, outcome=y, expert=yhat, row_ids=np.array([str(i) for i in range(cfg.n)]),
                 feature_names=names)
    desc = [f"base={lv:.4g}" for lv in levels]
    planted = _from_labels("planted", labels, desc, router)
    cov, prob, mcc = _exact_moments(cfg, grid, levels, cell_of, informed)
    truth = GroundTruth(p=p, u=u, planted_labels=labels, planted=planted, cell_base=levels,
                        cell_cov=cov, cell_prob=prob, informed=informed, mcc=mcc)
    return ds, truth


def write_synthetic(ds: Dataset, truth: GroundTruth, cfg: SynthConfig, csv_path) -> Path:
    """Persist the dataset as CSV and the ground truth as a JSON sidecar next to it."""
    csv_path = Path(csv_path)
    schema = save_dataset(ds, csv_path)
    sidecar = csv_path.with_suffix(".truth.json")
    doc = {
        "config": cfg.to_dict(),
        "schema": {"outcome": schema.outcome, "expert": schema.expert,
                   "features": list(schema.features), "id": schema.id},
        "truth": truth.summary(),
        "planted_partition": truth.planted.to_dict(),
        "rows": {"p": truth.p.tolist(), "u": truth.u.astype(int).tolist()},
    }
    sidecar.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return sidecar
