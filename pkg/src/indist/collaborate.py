"""Per-cell regression of outcomes on expert predictions, with the checks that
certify when the expert adds signal no predictor in the class can reproduce."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .dataset import Dataset
from .partition import UNSEEN, AuditReport, Partition
from .stats import IntervalEstimate, bootstrap_ci, covariance, variance
from .weak_learners import RegressionTree

MODEL_KINDS = ("mean_only", "linear", "logistic")

# logistic Newton settings
_MAX_ITER = 100
_TOL = 1e-8
_DIVERGED = 30.0


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def fit_logistic(x, y):
    """Univariate logistic fit by Newton's method (targets may be fractional).

    Returns ``(intercept, slope, ok)``; ``ok`` is False when the iterations
    diverge (separation) or fail to converge.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.ptp(x) == 0:
        m = y.mean()
        if m <= 0 or m >= 1:
            return 0.0, 0.0, False
        return float(math.log(m / (1 - m))), 0.0, True
    Z = np.column_stack([np.ones_like(x), x])
    coef = np.zeros(2)
    for _ in range(_MAX_ITER):
        p = _sigmoid(Z @ coef)
        W = p * (1 - p)
        H = Z.T @ (Z * W[:, None])
        g = Z.T @ (y - p)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return 0.0, 0.0, False
        coef = coef + step
        if not np.all(np.isfinite(coef)) or np.max(np.abs(coef)) > _DIVERGED:
            return 0.0, 0.0, False
        if np.max(np.abs(step)) < _TOL:
            return float(coef[0]), float(coef[1]), True
    return 0.0, 0.0, False


def least_squares_line(x, y) -> tuple[float, float]:
    """(intercept, slope) of the least-squares fit of y on x; slope 0 if x is constant."""
    vx = variance(x)
    beta = covariance(x, y) / vx if vx > 0 else 0.0
    return float(np.mean(y) - beta * np.mean(x)), float(beta)


@dataclass
class SubsetModels:
    kind: str
    mean: np.ndarray
    intercept: np.ndarray
    slope: np.ndarray
    global_mean: float
    fallback: np.ndarray
    sizes: np.ndarray

    @property
    def K(self) -> int:
        return int(self.mean.size)

    def predict(self, cells, yhat, clamp: bool = True) -> np.ndarray:
        cells = np.asarray(cells, dtype=int).reshape(-1)
        yhat = np.asarray(yhat, dtype=float).reshape(-1)
        out = np.full(cells.size, self.global_mean)
        known = (cells != UNSEEN) & (cells >= 0) & (cells < self.K)
        k = cells[known]
        if self.kind == "mean_only":
            v = self.mean[k]
        elif self.kind == "linear":
            v = self.intercept[k] + self.slope[k] * yhat[known]
        else:
            v = np.where(self.fallback[k], self.mean[k],
                         _sigmoid(self.intercept[k] + self.slope[k] * yhat[known]))
        out[known] = v
        return np.clip(out, 0.0, 1.0) if clamp else out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "global_mean": self.global_mean,
            "cells": [
                {"cell": k, "size": int(self.sizes[k]), "mean": float(self.mean[k]),
                 "intercept": float(self.intercept[k]), "slope": float(self.slope[k]),
                 "fallback": bool(self.fallback[k])}
                for k in range(self.K)
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "SubsetModels":
        cells = d["cells"]
        col = lambda key, dt=float: np.array([c[key] for c in cells], dtype=dt)
        return cls(kind=d["kind"], mean=col("mean"), intercept=col("intercept"), slope=col("slope"),
                   global_mean=float(d["global_mean"]), fallback=col("fallback", bool), sizes=col("size", int))


def fit_subset_models(p: Partition, train: Dataset, kind: str = "linear", labels=None) -> SubsetModels:
    """Fit one regressor of Y on the expert prediction inside each cell."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    labels = p.labels if labels is None else np.asarray(labels, dtype=int)
    if labels.size != train.n:
        raise ValueError("labels do not match the training rows")
    K = p.K
    mean, a, b = np.zeros(K), np.zeros(K), np.zeros(K)
    fallback, sizes = np.zeros(K, dtype=bool), np.zeros(K, dtype=int)
    y, yh = train.outcome, train.expert
    for k in range(K):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            raise ValueError(f"cell {k} has no training rows")
        sizes[k] = idx.size
        mean[k] = y[idx].mean()
        if kind == "linear":
            a[k], b[k] = least_squares_line(yh[idx], y[idx])
        elif kind == "logistic":
            a[k], b[k], ok = fit_logistic(yh[idx], y[idx])
            fallback[k] = not ok
        else:
            a[k] = mean[k]
    return SubsetModels(kind, mean, a, b, float(y.mean()), fallback, sizes)


def predict_collab(m: SubsetModels, p: Partition, x, yhat) -> np.ndarray:
    """Route ``x`` through the partition and apply the matching cell model to ``yhat``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return m.predict(p.assign(x), yhat)


@dataclass(frozen=True)
class CellCheck:
    cell: int
    size: int
    mse_model: float
    cov: float
    mse_comparator: float
    alpha_hat: float
    lhs: float
    rhs: float
    slack: float
    holds: bool
    diagnosis: str = ""


@dataclass
class TheoremCheck:
    cells: list[CellCheck]
    tol: float

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.cells)

    def records(self) -> list[dict]:
        return [c.__dict__.copy() for c in self.cells]


def theorem1_check(m: SubsetModels, p: Partition, eval_ds: Dataset, comparator, audit: AuditReport,
                   tol: float = 1e-6, labels=None) -> TheoremCheck:
    """Check ``MSE_k(linear) + 4 Cov_k(Y, Yhat)^2 <= MSE_k(f) + 2 alpha_hat_k`` in every cell.

    ``comparator`` is a tree or a vector of its predictions on ``eval_ds``.
    Predictions of the linear model are used unclamped. When a cell fails,
    the comparator's own |Cov| is measured: if it exceeds ``alpha_hat`` the
    audit underestimated alpha, otherwise the failure is reported as a violation.
    """
    if m.kind != "linear":
        raise ValueError("theorem1_check needs linear subset models")
    labels = p.assign_dataset(eval_ds) if labels is None else np.asarray(labels, dtype=int)
    f_all = comparator.predict(eval_ds.features) if isinstance(comparator, RegressionTree) \
        else np.asarray(comparator, dtype=float)
    y, yh = eval_ds.outcome, eval_ds.expert
    out = []
    for k in range(p.K):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        yk, yhk, fk = y[idx], yh[idx], f_all[idx]
        pred = m.predict(np.full(idx.size, k), yhk, clamp=False)
        mse_m = float(np.mean((yk - pred) ** 2))
        cov = covariance(yk, yhk)
        mse_f = float(np.mean((yk - fk) ** 2))
        alpha = float(audit.cells[k].alpha_hat)
        lhs = mse_m + 4 * cov * cov
        rhs = mse_f + 2 * alpha
        holds = lhs <= rhs + tol
        diagnosis = ""
        if not holds:
            diagnosis = "alpha_underestimate" if abs(covariance(fk, yk)) > alpha else "violation"
        out.append(CellCheck(k, int(idx.size), mse_m, cov, mse_f, alpha, lhs, rhs, rhs - lhs, holds, diagnosis))
    return TheoremCheck(out, tol)


@dataclass(frozen=True)
class Certificate:
    cell: int
    size: int
    abs_cov: IntervalEstimate
    threshold: float
    fired: bool


def certificate_threshold(alpha: float) -> float:
    return math.sqrt(alpha / 2)


def _abs_cov(y, yh):
    return abs(covariance(y, yh))


def theorem2_certificates(p: Partition, ds: Dataset, alpha: float, B: int = 1000, level: float = 0.95,
                          seed: int = 0, labels=None) -> list[Certificate]:
    """Per-cell bootstrap interval for |Cov_k(Y, Yhat)|; a certificate fires
    when the interval's lower end exceeds ``sqrt(alpha / 2)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    labels = p.assign_dataset(ds) if labels is None else np.asarray(labels, dtype=int)
    thr = certificate_threshold(alpha)
    out = []
    for k in range(p.K):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        ci = bootstrap_ci(_abs_cov, (ds.outcome[idx], ds.expert[idx]), B=B, level=level,
                          seed=rng_mod.derive_seed(seed, "certificate", k))
        out.append(Certificate(k, int(idx.size), ci, thr, bool(ci.lo > thr)))
    return out


def calibrate_feedback(gh, y, labels) -> np.ndarray:
    """Post-process a feedback score by regressing Y on it inside each cell; clamp to [0, 1]."""
    gh = np.asarray(gh, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if not gh.shape == y.shape == labels.shape:
        raise ValueError("gh, y and labels must have equal length")
    out = np.empty_like(gh)
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        a, b = least_squares_line(gh[idx], y[idx])
        out[idx] = a + b * gh[idx]
    return np.clip(out, 0.0, 1.0)


def calibration_gap(g, y) -> float:
    """Smallest eta with MSE(g) <= MSE(gamma + beta g) + eta for every line."""
    g = np.asarray(g, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = least_squares_line(g, y)
    return float(np.mean((y - g) ** 2) - np.mean((y - a - b * g) ** 2))


def mse_comparison(models: dict[str, SubsetModels], labels, ds: Dataset, B: int = 1000,
                   level: float = 0.95, seed: int = 0) -> dict[str, IntervalEstimate]:
    """Held-out MSE of each model with a percentile bootstrap interval."""
    labels = np.asarray(labels, dtype=int)
    out = {}
    for name, m in sorted(models.items()):
        err = (ds.outcome - m.predict(labels, ds.expert)) ** 2
        out[name] = bootstrap_ci(np.mean, err, B=B, level=level, seed=rng_mod.derive_seed(seed, "mse", 0))
    return out
