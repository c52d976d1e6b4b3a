"""Covariance, MCC, percentile bootstrap and confusion-matrix metrics.

All moments use the population form (denominator n), so that the
least-squares slope is exactly ``covariance(x, y) / covariance(x, x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError


def _pair(a, b):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size < 1:
        raise ValueError("need at least one observation")
    return a, b


def covariance(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def variance(a) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    return float(np.mean((a - a.mean()) ** 2))


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either input is constant."""
    a, b = _pair(a, b)
    va, vb = variance(a), variance(b)
    if va <= 0 or vb <= 0:
        return 0.0
    return covariance(a, b) / math.sqrt(va * vb)


def is_degenerate(a, b) -> bool:
    """True when either vector is constant (correlation undefined)."""
    a, b = _pair(a, b)
    return bool(np.ptp(a) == 0 or np.ptp(b) == 0)


def _check_binary(*vs):
    for v in vs:
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("expected a binary {0, 1} vector")


def mcc(pred, outcome) -> float:
    """Matthews correlation of two binary vectors, 0 when either is constant."""
    p, y = _pair(pred, outcome)
    _check_binary(p, y)
    c = confusion_counts(p, y)
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)


def bonferroni(level: float, m: int) -> float:
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be a positive integer")
    return level / m


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n) if n > 0 else float("nan")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def confusion_counts(decisions, outcomes) -> ConfusionCounts:
    d, y = _pair(decisions, outcomes)
    _check_binary(d, y)
    d, y = d.astype(bool), y.astype(bool)
    return ConfusionCounts(
        tp=int(np.sum(d & y)), fp=int(np.sum(d & ~y)),
        tn=int(np.sum(~d & ~y)), fn=int(np.sum(~d & y)),
    )


def rate(num: int, den: int) -> float | None:
    """``num / den`` or ``None`` (undefined) when the denominator is zero."""
    return num / den if den > 0 else None


@dataclass(frozen=True)
class ClassificationMetrics:
    fraction_positive: float
    accuracy: float
    sensitivity: float | None
    specificity: float | None
    counts: ConfusionCounts

    @property
    def fpr(self) -> float | None:
        return rate(self.counts.fp, self.counts.fp + self.counts.tn)

    def with_errors(self) -> dict:
        """Point values with +-2 binomial standard errors."""
        c = self.counts
        out = {}
        for name, value, n in (
            ("fraction_positive", self.fraction_positive, c.n),
            ("accuracy", self.accuracy, c.n),
            ("sensitivity", self.sensitivity, c.tp + c.fn),
            ("specificity", self.specificity, c.tn + c.fp),
        ):
            out[name] = value
            out[name + "_2se"] = None if value is None else 2 * binomial_se(value, n)
        return out


def classification_metrics(decisions, outcomes) -> ClassificationMetrics:
    c = confusion_counts(decisions, outcomes)
    return ClassificationMetrics(
        fraction_positive=(c.tp + c.fp) / c.n,
        accuracy=(c.tp + c.tn) / c.n,
        sensitivity=rate(c.tp, c.tp + c.fn),
        specificity=rate(c.tn, c.tn + c.fp),
        counts=c,
    )


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lo: float
    hi: float
    level: float
    replicates: int
    seed: int
    missing: int = 0

    def excludes(self, value: float = 0.0) -> bool:
        return value < self.lo or value > self.hi


def _resample(rows, idx):
    if isinstance(rows, tuple):
        return tuple(np.asarray(r)[idx] for r in rows)
    return (np.asarray(rows)[idx],)


def _evaluate(stat, args):
    try:
        v = stat(*args)
    except (ValueError, ZeroDivisionError, FloatingPointError):
        return None
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def bootstrap_ci(stat: Callable[..., float], rows, B: int = 1000, level: float = 0.95,
                 seed: int = 0) -> IntervalEstimate:
    """Percentile bootstrap interval for ``stat``.

    ``rows`` is an array (resampled along axis 0) or a tuple of equal-length
    arrays resampled jointly and passed positionally to ``stat``. Replicate r
    draws from ``default_rng([seed, r])``. Replicates where ``stat`` raises or
    returns a non-finite value are dropped and counted in ``missing``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    n = len(rows[0]) if isinstance(rows, tuple) else len(rows)
    if n < 1:
        raise ValueError("need at least one row")
    point = _evaluate(stat, _resample(rows, np.arange(n)))
    reps = []
    for r in range(B):
        idx = np.random.default_rng([int(seed), r]).integers(0, n, size=n)
        v = _evaluate(stat, _resample(rows, idx))
        if v is not None:
            reps.append(v)
    if not reps:
        raise NumericalError("bootstrap", "statistic undefined on every replicate")
    reps = np.asarray(reps)
    tail = (1 - level) / 2
    lo, hi = np.quantile(reps, [tail, 1 - tail])
    return IntervalEstimate(
        point=float("nan") if point is None else point,
        lo=float(lo), hi=float(hi), level=level, replicates=B, seed=int(seed),
        missing=B - len(reps),
    )
