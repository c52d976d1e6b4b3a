"""Partitions of the input space and their indistinguishability audits.

A :class:`Partition` pairs the training-row cell labels with a router that
assigns any new input to a cell, so it can be applied to held-out data.
Routers for level-set, epsilon-net and boosted partitions are total; the
observational router sends feature vectors never seen in training to
``UNSEEN``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .dataset import Dataset, ScoreRuleConfig, score_rule
from .errors import DataError
from .stats import covariance, variance
from .weak_learners import OracleSpec, RegressionTree, fit_tree, random_tree

logger = logging.getLogger(__name__)

UNSEEN = -1
KINDS = ("observational", "level_set", "epsilon_net", "boosted")


def unit_interval_edges(width: float = 0.1) -> np.ndarray:
    """Edges 0, width, ..., 1: half-open bins [e_i, e_{i+1}) plus the singleton {1}."""
    m = int(round(1 / width))
    return np.linspace(0.0, 1.0, m + 1)


def bin_index(values, edges) -> np.ndarray:
    """Bin of each value: i for e_i <= v < e_{i+1}, and len(edges)-1 for v == e_last."""
    v = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if np.any(v < edges[0]) or np.any(v > edges[-1]) or np.any(~np.isfinite(v)):
        bad = v[(v < edges[0]) | (v > edges[-1]) | ~np.isfinite(v)][0]
        raise DataError(f"value {bad!r} outside the covered range [{edges[0]}, {edges[-1]}]")
    return np.searchsorted(edges, v, side="right") - 1


def bin_label(b: int, edges) -> str:
    if b == len(edges) - 1:
        return f"{{{edges[-1]:.6g}}}"
    return f"[{edges[b]:.6g}, {edges[b + 1]:.6g})"


def _nearest_map(n_bins: int, keep) -> np.ndarray:
    """Map every bin index to the nearest kept bin (ties go to the lower index)."""
    keep = np.asarray(sorted(keep))
    out = np.empty(n_bins, dtype=int)
    for b in range(n_bins):
        out[b] = keep[np.argmin(np.abs(keep - b))]
    return out


# -- routers -----------------------------------------------------------------

class LookupRouter:
    """Exact feature-vector lookup."""

    kind = "lookup"

    def __init__(self, table: dict[tuple, int]):
        self.table = table

    def route(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.table.get(tuple(row), UNSEEN) for row in X.tolist()], dtype=int)

    def to_dict(self):
        items = sorted(self.table.items(), key=lambda kv: kv[1])
        return {"type": self.kind, "vectors": [list(k) for k, _ in items], "cells": [v for _, v in items]}

    @classmethod
    def from_dict(cls, d):
        return cls({tuple(float(x) for x in k): int(v) for k, v in zip(d["vectors"], d["cells"])})


class LevelSetRouter:
    """Bins a score; the score is read from a feature column, computed from a
    scoring rule, or (with neither set) passed directly as a 1-D array."""

    kind = "level_set"

    def __init__(self, edges, bin_to_cell, score_index: int | None = None,
                 rule: ScoreRuleConfig | None = None, feature_names=()):
        self.edges = np.asarray(edges, dtype=float)
        self.bin_to_cell = np.asarray(bin_to_cell, dtype=int)
        self.score_index = score_index
        self.rule = rule
        self.feature_names = tuple(feature_names)

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.rule is not None:
            return score_rule(np.atleast_2d(X), self.rule, self.feature_names).astype(float)
        if self.score_index is not None:
            return np.atleast_2d(X)[:, self.score_index]
        return X.reshape(-1)

    def route(self, X) -> np.ndarray:
        return self.bin_to_cell[bin_index(self.scores(X), self.edges)]

    def to_dict(self):
        return {
            "type": self.kind,
            "edges": self.edges.tolist(),
            "bin_to_cell": self.bin_to_cell.tolist(),
            "score_index": self.score_index,
            "rule": None if self.rule is None else self.rule.to_dict(),
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d):
        rule = None if d.get("rule") is None else ScoreRuleConfig.from_dict(d["rule"])
        return cls(d["edges"], d["bin_to_cell"], d.get("score_index"), rule, d.get("feature_names", ()))


def pairwise_distance(A, B, metric: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if metric == "euclidean":
        diff = A[:, None, :] - B[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))
    if metric == "hamming":
        return np.sum(A[:, None, :] != B[None, :, :], axis=2).astype(float)
    raise ValueError(f"unknown metric {metric!r}; expected 'euclidean' or 'hamming'")


class NearestCenterRouter:
    kind = "nearest_center"

    def __init__(self, centers, metric: str):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.metric = metric

    def route(self, X, chunk: int = 2048) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0], dtype=int)
        for s in range(0, X.shape[0], chunk):
            D = pairwise_distance(X[s:s + chunk], self.centers, self.metric)
            out[s:s + chunk] = np.argmin(D, axis=1)
        return out

    def to_dict(self):
        return {"type": self.kind, "centers": self.centers.tolist(), "metric": self.metric}

    @classmethod
    def from_dict(cls, d):
        return cls(d["centers"], d["metric"])


@dataclass
class BoostedPredictor:
    """Piecewise predictor built by replaying per-round patches.

    Each round holds ``(bin, tree)`` pairs applied simultaneously: rows whose
    current value falls in ``bin`` take the tree's prediction.
    """

    base: float
    bin_edges: np.ndarray
    rounds: list[list[tuple[int, RegressionTree]]] = field(default_factory=list)
    converged: bool = False
    mse_history: list[float] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        h = np.full(X.shape[0], self.base)
        for patches in self.rounds:
            bins = bin_index(h, self.bin_edges)
            new = h.copy()
            for b, tree in patches:
                m = bins == b
                if m.any():
                    new[m] = tree.predict(X[m])
            h = new
        return h

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def to_dict(self):
        return {
            "base": self.base,
            "bin_edges": np.asarray(self.bin_edges).tolist(),
            "converged": self.converged,
            "mse_history": list(self.mse_history),
            "rounds": [[{"bin": int(b), "tree": t.to_dict()} for b, t in r] for r in self.rounds],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            base=float(d["base"]),
            bin_edges=np.asarray(d["bin_edges"], dtype=float),
            rounds=[[(int(p["bin"]), RegressionTree.from_dict(p["tree"])) for p in r] for r in d["rounds"]],
            converged=bool(d["converged"]),
            mse_history=[float(x) for x in d["mse_history"]],
        )


class BoostedRouter:
    kind = "boosted"

    def __init__(self, predictor: BoostedPredictor, bin_to_cell):
        self.predictor = predictor
        self.bin_to_cell = np.asarray(bin_to_cell, dtype=int)

    def route(self, X) -> np.ndarray:
        return self.bin_to_cell[bin_index(self.predictor.predict(X), self.predictor.bin_edges)]

    def to_dict(self):
        return {"type": self.kind, "predictor": self.predictor.to_dict(),
                "bin_to_cell": self.bin_to_cell.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(BoostedPredictor.from_dict(d["predictor"]), d["bin_to_cell"])


_ROUTERS = {r.kind: r for r in (LookupRouter, LevelSetRouter, NearestCenterRouter, BoostedRouter)}


@dataclass(frozen=True)
class Cell:
    index: int
    rows: np.ndarray
    description: str

    @property
    def size(self) -> int:
        return int(self.rows.size)


@dataclass
class Partition:
    kind: str
    labels: np.ndarray
    cells: list[Cell]
    router: object

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)

    @property
    def K(self) -> int:
        return len(self.cells)

    def assign(self, X) -> np.ndarray:
        return self.router.route(X)

    def assign_dataset(self, ds: Dataset) -> np.ndarray:
        return self.assign(ds.features)

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.cells], dtype=int)

    def to_dict(self, row_ids=None) -> dict:
        cells = []
        for c in self.cells:
            entry = {"index": c.index, "size": c.size, "description": c.description,
                     "rows": c.rows.tolist()}
            if row_ids is not None:
                entry["row_ids"] = [str(row_ids[i]) for i in c.rows]
            cells.append(entry)
        return {"kind": self.kind, "n_cells": self.K, "n_rows": int(self.labels.size),
                "cells": cells, "router": self.router.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "Partition":
        labels = np.empty(int(d["n_rows"]), dtype=int)
        cells = []
        for c in d["cells"]:
            rows = np.asarray(c["rows"], dtype=int)
            labels[rows] = int(c["index"])
            cells.append(Cell(int(c["index"]), rows, c["description"]))
        router = _ROUTERS[d["router"]["type"]].from_dict(d["router"])
        return cls(kind=d["kind"], labels=labels, cells=cells, router=router)


def _from_labels(kind, labels, descriptions, router) -> Partition:
    labels = np.asarray(labels, dtype=int)
    cells = [Cell(k, np.flatnonzero(labels == k), descriptions[k]) for k in range(len(descriptions))]
    return Partition(kind=kind, labels=labels, cells=cells, router=router)


# -- constructions -------------------------------------------------------------

def observational_partition(ds: Dataset) -> Partition:
    """One cell per distinct feature vector (lexicographic order)."""
    uniq, inverse = np.unique(ds.features, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    table = {tuple(row): k for k, row in enumerate(uniq.tolist())}
    desc = ["x=(" + ", ".join(f"{v:g}" for v in row) + ")" for row in uniq.tolist()]
    return _from_labels("observational", inverse, desc, LookupRouter(table))


def level_set_partition(scores, bin_edges, score_index: int | None = None,
                        rule: ScoreRuleConfig | None = None, feature_names=()) -> Partition:
    """Occupied bins of ``scores``; empty bins are dropped.

    ``score_index`` or ``rule`` tell the router how to recompute the score from
    features for new rows; with neither, the router expects raw scores.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 1 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly ascending")
    bins = bin_index(scores, edges)
    occupied = np.unique(bins)
    remap = {int(b): k for k, b in enumerate(occupied)}
    labels = np.array([remap[int(b)] for b in bins], dtype=int)
    bin_to_cell = np.array([remap[int(b)] for b in _nearest_map(edges.size, occupied)])
    desc = [bin_label(int(b), edges) for b in occupied]
    router = LevelSetRouter(edges, bin_to_cell, score_index, rule, feature_names)
    return _from_labels("level_set", labels, desc, router)


def unit_score_edges(lo: int, hi: int) -> np.ndarray:
    """Edges lo, lo+1, ..., hi: one bin per integer score."""
    return np.arange(lo, hi + 1, dtype=float)


def epsilon_net_partition(ds: Dataset, metric: str = "euclidean", radius: float = 1.0) -> Partition:
    """Greedy cover: scan rows in order, opening a centre whenever no existing
    centre lies within ``radius``; then assign each row to its nearest centre."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if metric not in ("euclidean", "hamming"):
        raise ValueError(f"unknown metric {metric!r}")
    X = ds.features
    centers: list[int] = []
    C = np.empty((0, X.shape[1]))
    for i in range(X.shape[0]):
        if C.shape[0] == 0 or pairwise_distance(X[i], C, metric).min() > radius:
            centers.append(i)
            C = np.vstack([C, X[i]])
    router = NearestCenterRouter(C, metric)
    labels = router.route(X)
    desc = [f"centre row {ds.row_ids[i]}" for i in centers]
    return _from_labels("epsilon_net", labels, desc, router)


def lipschitz_net_radius(alpha: float, lipschitz: float) -> float:
    """Cover radius whose cells have diameter at most 4*alpha/L.

    Any L-Lipschitz f then ranges over at most 4*alpha inside a cell, which
    bounds its within-cell covariance with Y by alpha.
    """
    return 2 * alpha / lipschitz


def boost_multicalibrated(train: Dataset, oracle: OracleSpec = OracleSpec(), alpha: float = 0.01,
                          bin_edges=None, min_cell: int = 50, max_rounds: int = 100):
    """Level-set boosting until no oracle tree improves squared error by alpha^2 in any bin.

    Starts from the training mean. Each round, every bin of the current
    predictor holding at least ``min_cell`` rows gets an oracle tree fit on its
    rows; when that tree lowers the bin's mean squared error by ``alpha**2`` or
    more, it replaces the predictor on the bin. Returns ``(predictor, partition)``
    where the partition is the occupied level sets, with bins smaller than
    ``min_cell`` merged into the nearest bin that is large enough.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if min_cell < 1:
        raise ValueError("min_cell must be >= 1")
    edges = unit_interval_edges() if bin_edges is None else np.asarray(bin_edges, dtype=float)
    if edges[0] > 0 or edges[-1] < 1:
        raise ValueError("bin_edges must cover [0, 1]")
    X, y = train.features, train.outcome
    h = np.full(train.n, float(y.mean()))
    pred = BoostedPredictor(base=float(y.mean()), bin_edges=edges)
    pred.mse_history.append(float(np.mean((h - y) ** 2)))
    thresh = alpha * alpha
    for r in range(max_rounds + 1):
        bins = bin_index(h, edges)
        updates = []
        for b in np.unique(bins):
            idx = np.flatnonzero(bins == b)
            if idx.size < min_cell:
                continue
            tree = fit_tree(X[idx], y[idx], spec=oracle)
            f = tree.predict(X[idx])
            gap = np.mean((h[idx] - y[idx]) ** 2) - np.mean((f - y[idx]) ** 2)
            if gap >= thresh:
                updates.append((int(b), tree, idx, f))
        if not updates:
            pred.converged = True
            break
        if r == max_rounds:
            logger.warning("boosting stopped at max_rounds=%d without converging", max_rounds)
            break
        for _, _, idx, f in updates:
            h[idx] = f
        pred.rounds.append([(b, tree) for b, tree, _, _ in updates])
        pred.mse_history.append(float(np.mean((h - y) ** 2)))

    bins = bin_index(h, edges)
    occupied, counts = np.unique(bins, return_counts=True)
    eligible = occupied[counts >= min_cell]
    if eligible.size == 0:
        eligible = occupied[[np.argmax(counts)]]
    remap = {int(b): k for k, b in enumerate(eligible)}
    bin_to_cell = np.array([remap[int(b)] for b in _nearest_map(edges.size, eligible)])
    labels = bin_to_cell[bins]
    desc = []
    for b in eligible:
        merged = [int(o) for o in occupied if bin_to_cell[o] == remap[int(b)] and o != b]
        text = "h in " + bin_label(int(b), edges)
        if merged:
            text += " + merged " + ", ".join(bin_label(m, edges) for m in merged)
        desc.append(text)
    part = _from_labels("boosted", labels, desc, BoostedRouter(pred, bin_to_cell))
    return pred, part


def premise_gaps(pred: BoostedPredictor, train: Dataset, oracle: OracleSpec, min_cell: int = 1):
    """Per-bin ``E_bin[(h-Y)^2] - E_bin[(f-Y)^2]`` for an oracle tree refit on each bin.

    Returns a list of ``(bin, size, gap)`` for bins holding at least ``min_cell`` rows.
    """
    X, y = train.features, train.outcome
    h = pred.predict(X)
    bins = bin_index(h, pred.bin_edges)
    out = []
    for b in np.unique(bins):
        idx = np.flatnonzero(bins == b)
        if idx.size < min_cell:
            continue
        f = fit_tree(X[idx], y[idx], spec=oracle).predict(X[idx])
        gap = float(np.mean((h[idx] - y[idx]) ** 2) - np.mean((f - y[idx]) ** 2))
        out.append((int(b), int(idx.size), gap))
    return out


# -- audit ---------------------------------------------------------------------

@dataclass(frozen=True)
class CellAudit:
    cell: int
    size: int
    alpha_hat: float
    best_probe: str
    max_probe_var: float
    mse_gap: float
    small: bool = False

    @property
    def variance_alpha_bound(self) -> float:
        """Probe-set alpha implied by the largest probe variance: sqrt(var)/2."""
        return 0.5 * float(np.sqrt(self.max_probe_var))


@dataclass
class AuditReport:
    cells: list[CellAudit]
    probes: int
    caveat: str = (
        "alpha_hat is the largest |Cov(f(X), Y)| over the probes tried; "
        "it is a lower bound on the class-wide indistinguishability level"
    )

    @property
    def alpha_hat(self) -> np.ndarray:
        return np.array([c.alpha_hat for c in self.cells])

    def records(self) -> list[dict]:
        return [
            {"cell": c.cell, "size": c.size, "alpha_hat": c.alpha_hat,
             "var_bound": c.variance_alpha_bound, "max_probe_var": c.max_probe_var,
             "mse_gap": c.mse_gap, "best_probe": c.best_probe, "small": c.small}
            for c in self.cells
        ]


def max_stump_covariance(X, y) -> tuple[float, str, float]:
    """Exact max of |Cov(f(X), Y)| over depth-1 trees with leaves in [0, 1].

    Covariance is linear in the leaf difference, so the optimum uses 0/1
    leaves and equals max |Cov(1[x_j < t], Y)|. Returns (value, description,
    largest indicator variance among all stumps).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = y.size
    ybar = y.mean()
    best = (0.0, "constant")
    maxvar = 0.0
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        boundary = np.flatnonzero(xs[1:] > xs[:-1])
        if boundary.size == 0:
            continue
        nl = boundary + 1
        sl = np.cumsum(ys)[boundary]
        cov = (sl - nl * ybar) / n
        p = nl / n
        maxvar = max(maxvar, float(np.max(p * (1 - p))))
        i = int(np.argmax(np.abs(cov)))
        if abs(cov[i]) > best[0]:
            t = (xs[boundary[i]] + xs[boundary[i] + 1]) / 2
            best = (float(abs(cov[i])), f"stump x{j}<{t:.6g}")
    return best[0], best[1], maxvar


def audit_partition(p: Partition, ds: Dataset, oracle: OracleSpec = OracleSpec(), probes: int = 20,
                    seed: int = 0, labels=None, baseline=None) -> AuditReport:
    """Estimate each cell's indistinguishability level from a probe set.

    Probes: the oracle tree fit on the cell's outcomes, the tree fit on
    ``1 - Y``, every 0/1-leaf stump, and ``probes`` random trees of the
    oracle's depth. ``baseline`` (per-row predictions) sets the reference for
    the squared-error gap; the cell mean is used otherwise.
    """
    labels = p.assign_dataset(ds) if labels is None else np.asarray(labels, dtype=int)
    X, y = ds.features, ds.outcome
    out = []
    for k in range(p.K):
        idx = np.flatnonzero(labels == k)
        if idx.size < 2:
            out.append(CellAudit(k, int(idx.size), 0.0, "none", 0.0, 0.0, small=True))
            continue
        Xk, yk = X[idx], y[idx]
        alpha, best, maxvar = max_stump_covariance(Xk, yk)
        fitted = fit_tree(Xk, yk, spec=oracle)
        flipped = fit_tree(Xk, 1 - yk, spec=oracle)
        rng = rng_mod.generator(seed, "audit", k)
        cands = [("oracle fit " + fitted.describe(), fitted), ("oracle fit 1-Y " + flipped.describe(), flipped)]
        cands += [(f"random probe {i}", random_tree(rng, Xk, oracle.max_depth)) for i in range(probes)]
        fitted_pred = None
        for name, tree in cands:
            f = tree.predict(Xk)
            if fitted_pred is None:
                fitted_pred = f
            c = abs(covariance(f, yk))
            maxvar = max(maxvar, variance(f))
            if c > alpha:
                alpha, best = c, name
        base = np.full(idx.size, yk.mean()) if baseline is None else np.asarray(baseline, float)[idx]
        gap = float(np.mean((base - yk) ** 2) - np.mean((fitted_pred - yk) ** 2))
        out.append(CellAudit(k, int(idx.size), float(alpha), best, float(maxvar), gap))
    return AuditReport(cells=out, probes=probes)
