"""Per-cell Admit / Discharge / Defer policies and their Pareto frontier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError
from .partition import UNSEEN, Partition
from .stats import ConfusionCounts, confusion_counts, rate

ADMIT, DISCHARGE, DEFER = 0, 1, 2
ACTION_NAMES = ("Admit", "Discharge", "Defer")
ACTION_CODES = "ADX"
MAX_CELLS = 13


@dataclass(frozen=True)
class Policy:
    actions: tuple[int, ...]

    def __str__(self) -> str:
        return "".join(ACTION_CODES[a] for a in self.actions)


@dataclass(frozen=True)
class PolicyEval:
    tpr: float | None
    fpr: float | None
    automation: float
    counts: ConfusionCounts
    cell_counts: tuple[ConfusionCounts, ...]


def enumerate_policies(K: int) -> list[Policy]:
    """All 3**K policies in base-3 order, cell 0 varying fastest."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if K > MAX_CELLS:
        raise ConfigError(
            f"3**{K} policies is too many to enumerate (limit K <= {MAX_CELLS}); "
            "sample policies or coarsen the partition"
        )
    return [Policy(tuple(int(a) for a in row)) for row in _action_matrix(K)]


def _action_matrix(K: int) -> np.ndarray:
    n = 3**K
    codes = np.arange(n)
    return np.stack([(codes // 3**k) % 3 for k in range(K)], axis=1) if K else np.zeros((1, 0), dtype=int)


def _cell_tables(labels, ds: Dataset, K: int) -> np.ndarray:
    """counts[k, action] = (tp, fp, tn, fn); the last row collects unseen rows (always deferred)."""
    y = ds.outcome.astype(bool)
    d = ds.expert.astype(bool)
    if not (np.all((ds.outcome == 0) | (ds.outcome == 1)) and np.all((ds.expert == 0) | (ds.expert == 1))):
        raise ValueError("policy evaluation needs binary outcome and expert columns")
    labels = np.where(labels == UNSEEN, K, labels)
    T = np.zeros((K + 1, 3, 4), dtype=np.int64)
    for k in range(K + 1):
        m = labels == k
        pos, neg = int(np.sum(y[m])), int(np.sum(~y[m]))
        T[k, ADMIT] = (pos, neg, 0, 0)
        T[k, DISCHARGE] = (0, 0, neg, pos)
        T[k, DEFER] = (int(np.sum(d[m] & y[m])), int(np.sum(d[m] & ~y[m])),
                       int(np.sum(~d[m] & ~y[m])), int(np.sum(~d[m] & y[m])))
    return T


def evaluate_policy(pol: Policy, p: Partition, ds: Dataset, labels=None) -> PolicyEval:
    """Row-level evaluation: Admit -> 1, Discharge -> 0, Defer -> the expert's decision.

    Rows routed to no cell are deferred.
    """
    if len(pol.actions) != p.K:
        raise ValueError(f"policy has {len(pol.actions)} actions but the partition has {p.K} cells")
    labels = p.assign_dataset(ds) if labels is None else np.asarray(labels, dtype=int)
    acts = np.array(list(pol.actions) + [DEFER], dtype=int)
    row_act = acts[np.where(labels == UNSEEN, p.K, labels)]
    decision = np.where(row_act == ADMIT, 1.0, np.where(row_act == DISCHARGE, 0.0, ds.expert))
    c = confusion_counts(decision, ds.outcome)
    cells = tuple(
        confusion_counts(decision[labels == k], ds.outcome[labels == k]) if np.any(labels == k)
        else ConfusionCounts(0, 0, 0, 0)
        for k in range(p.K)
    )
    return PolicyEval(
        tpr=rate(c.tp, c.tp + c.fn),
        fpr=rate(c.fp, c.fp + c.tn),
        automation=float(np.mean(row_act != DEFER)),
        counts=c,
        cell_counts=cells,
    )


@dataclass(frozen=True)
class PolicyTable:
    """Evaluations of many policies in columnar form."""

    actions: np.ndarray  # (P, K)
    counts: np.ndarray  # (P, 4): tp, fp, tn, fn
    automated: np.ndarray  # (P,) rows not deferred
    n: int

    @property
    def tpr(self) -> np.ndarray:
        tp, fn = self.counts[:, 0], self.counts[:, 3]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), np.nan)

    @property
    def fpr(self) -> np.ndarray:
        fp, tn = self.counts[:, 1], self.counts[:, 2]
        return np.where(fp + tn > 0, fp / np.maximum(fp + tn, 1), np.nan)

    @property
    def automation(self) -> np.ndarray:
        return self.automated / self.n

    def policy(self, i: int) -> Policy:
        return Policy(tuple(int(a) for a in self.actions[i]))

    def records(self, idx=None) -> list[dict]:
        idx = range(len(self.actions)) if idx is None else idx
        tpr, fpr, auto = self.tpr, self.fpr, self.automation
        out = []
        for i in idx:
            out.append({
                "policy": str(self.policy(i)),
                "tpr": None if np.isnan(tpr[i]) else float(tpr[i]),
                "fpr": None if np.isnan(fpr[i]) else float(fpr[i]),
                "automation": float(auto[i]),
                "tp": int(self.counts[i, 0]), "fp": int(self.counts[i, 1]),
                "tn": int(self.counts[i, 2]), "fn": int(self.counts[i, 3]),
                **{f"cell{k}": ACTION_NAMES[a] for k, a in enumerate(self.actions[i])},
            })
        return out


def evaluate_all(p: Partition, ds: Dataset, labels=None) -> PolicyTable:
    """Evaluate every policy by summing precomputed per-cell, per-action counts."""
    labels = p.assign_dataset(ds) if labels is None else np.asarray(labels, dtype=int)
    K = p.K
    A = _action_matrix(K)
    if K > MAX_CELLS:
        raise ConfigError(f"K={K} exceeds the enumeration limit {MAX_CELLS}")
    T = _cell_tables(labels, ds, K)
    counts = T[K, DEFER][None, :].repeat(A.shape[0], axis=0).copy()
    sizes = np.array([np.sum(labels == k) for k in range(K)], dtype=np.int64)
    automated = np.zeros(A.shape[0], dtype=np.int64)
    for k in range(K):
        counts += T[k][A[:, k]]
        automated += np.where(A[:, k] != DEFER, sizes[k], 0)
    return PolicyTable(actions=A, counts=counts, automated=automated, n=int(labels.size))


def pareto_mask(tpr, fpr, automation, block: int = 512) -> np.ndarray:
    """Boolean mask of non-dominated points.

    j dominates i when tpr_j >= tpr_i, fpr_j <= fpr_i, auto_j >= auto_i with one
    strict; exact ties never dominate each other. A comparison involving an
    undefined (NaN) rate counts as a tie on that axis.
    """
    t, f = np.asarray(tpr, dtype=float), np.asarray(fpr, dtype=float)
    a = np.asarray(automation, dtype=float)
    tn, fn = np.isnan(t), np.isnan(f)
    n = t.size
    keep = np.ones(n, dtype=bool)
    with np.errstate(invalid="ignore"):
        for s in range(0, n, block):
            sl = slice(s, s + block)
            t_tie = tn[sl, None] | tn[None, :]
            f_tie = fn[sl, None] | fn[None, :]
            weak = ((t[None, :] >= t[sl, None]) | t_tie) & ((f[None, :] <= f[sl, None]) | f_tie) \
                & (a[None, :] >= a[sl, None])
            strict = ((t[None, :] > t[sl, None]) & ~t_tie) | ((f[None, :] < f[sl, None]) & ~f_tie) \
                | (a[None, :] > a[sl, None])
            keep[sl] = ~np.any(weak & strict, axis=1)
    return keep


def pareto_frontier(evals: list[tuple[Policy, PolicyEval]]) -> list[tuple[Policy, PolicyEval]]:
    """Non-dominated sublist, input order preserved."""
    if not evals:
        raise ValueError("need at least one evaluation")
    nan = float("nan")
    tpr = np.array([nan if e.tpr is None else e.tpr for _, e in evals])
    fpr = np.array([nan if e.fpr is None else e.fpr for _, e in evals])
    auto = np.array([e.automation for _, e in evals])
    mask = pareto_mask(tpr, fpr, auto)
    return [pe for pe, k in zip(evals, mask) if k]


def frontier_indices(table: PolicyTable) -> np.ndarray:
    return np.flatnonzero(pareto_mask(table.tpr, table.fpr, table.automation))
