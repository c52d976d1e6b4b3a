"""Depth-bounded regression trees used as the squared-error oracle for the predictor class.

Splits are axis-aligned: a row goes left when ``x[feature] < threshold``.
Candidate thresholds are midpoints between consecutive distinct values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# a split must reduce weighted SSE by more than this fraction of the node weight
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class OracleSpec:
    max_depth: int = 3
    min_leaf: int = 5
    tie_break: str = "lowest_feature_then_threshold"

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.tie_break != "lowest_feature_then_threshold":
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")


@dataclass(frozen=True)
class Node:
    value: float | None
    feature: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "feature" not in d:
            return cls(value=float(d["value"]))
        return cls(
            value=None,
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


@dataclass(frozen=True)
class RegressionTree:
    root: Node
    n_features: int
    max_depth: int

    @property
    def depth(self) -> int:
        return self.root.depth()

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0])
        _route(self.root, X, np.arange(X.shape[0]), out)
        return out

    def leaf_index(self, X) -> np.ndarray:
        """Integer id of the leaf each row lands in (left-to-right order)."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=int)
        counter = iter(range(1 << 20))

        def walk(node, idx):
            if node.is_leaf:
                out[idx] = next(counter)
                return
            go_left = X[idx, node.feature] < node.threshold
            walk(node.left, idx[go_left])
            walk(node.right, idx[~go_left])

        walk(self.root, np.arange(X.shape[0]))
        return out

    def splits(self) -> list[tuple[int, float]]:
        found = []

        def walk(node):
            if not node.is_leaf:
                found.append((node.feature, node.threshold))
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return found

    def describe(self) -> str:
        if self.root.is_leaf:
            return f"leaf({self.root.value:.4g})"
        return " ".join(f"x{f}<{t:.4g}" for f, t in self.splits())

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "max_depth": self.max_depth, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(root=Node.from_dict(d["root"]), n_features=int(d["n_features"]),
                   max_depth=int(d["max_depth"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _route(node: Node, X, idx, out):
    if node.is_leaf:
        out[idx] = node.value
        return
    go_left = X[idx, node.feature] < node.threshold
    _route(node.left, X, idx[go_left], out)
    _route(node.right, X, idx[~go_left], out)


def predict_tree(tree: RegressionTree, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {x.shape[0]}")
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.value


def _clamp(v: float) -> float:
    return float(min(1.0, max(0.0, v)))


def _leaf_value(y, w) -> float:
    sw = w.sum()
    return _clamp(float(np.dot(w, y) / sw) if sw > 0 else float(y.mean()))


def _best_split(X, y, w, min_leaf):
    """Greedy weighted-SSE split search at one node.

    Returns (gain, feature, threshold) or None.
    """
    n, d = X.shape
    sw = w.sum()
    if n < 2 * min_leaf or sw <= 0:
        return None
    mu = np.dot(w, y) / sw
    yc = y - mu
    sse_parent = np.dot(w, yc * yc)
    best = None
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ws = w[order]
        cw = np.cumsum(ws)[:-1]
        cwy = np.cumsum(ws * yc[order])[:-1]
        cwyy = np.cumsum(ws * yc[order] ** 2)[:-1]
        # split after position i puts rows 0..i on the left
        valid = xs[1:] > xs[:-1]
        left_n = np.arange(1, n)
        valid &= (left_n >= min_leaf) & (n - left_n >= min_leaf)
        rw = sw - cw
        valid &= (cw > 0) & (rw > 0)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            sse_l = cwyy - cwy**2 / cw
            ty = -cwy  # total of centered y is zero
            sse_r = (sse_parent - cwyy) - ty**2 / rw
        gain = np.where(valid, sse_parent - sse_l - sse_r, -np.inf)
        i = int(np.argmax(gain))  # first max == smallest threshold
        g = float(gain[i])
        if best is None or g > best[0] + _GAIN_EPS * sw:
            best = (g, j, (xs[i] + xs[i + 1]) / 2)
    if best is None or best[0] <= _GAIN_EPS * sw:
        return None
    return best


def fit_tree(features, targets, weights=None, spec: OracleSpec = OracleSpec()) -> RegressionTree:
    """Greedy CART fit minimising weighted squared error; leaves hold clamped weighted means."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: features {X.shape}, targets {y.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != y.shape:
        raise ValueError("weights length does not match targets")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")

    def grow(idx, depth):
        ys, ws = y[idx], w[idx]
        value = _leaf_value(ys, ws)
        if depth >= spec.max_depth:
            return Node(value=value)
        split = _best_split(X[idx], ys, ws, spec.min_leaf)
        if split is None:
            return Node(value=value)
        _, j, t = split
        go_left = X[idx, j] < t
        return Node(
            value=None,
            feature=j,
            threshold=float(t),
            left=grow(idx[go_left], depth + 1),
            right=grow(idx[~go_left], depth + 1),
        )

    root = grow(np.arange(X.shape[0]), 0)
    return RegressionTree(root=root, n_features=X.shape[1], max_depth=spec.max_depth)


def constant_tree(value: float, n_features: int) -> RegressionTree:
    return RegressionTree(root=Node(value=_clamp(value)), n_features=n_features, max_depth=0)


def stump(feature: int, threshold: float, left: float, right: float, n_features: int) -> RegressionTree:
    root = Node(value=None, feature=int(feature), threshold=float(threshold),
                left=Node(value=_clamp(left)), right=Node(value=_clamp(right)))
    return RegressionTree(root=root, n_features=n_features, max_depth=1)


def candidate_thresholds(column) -> np.ndarray:
    u = np.unique(np.asarray(column, dtype=float))
    return (u[:-1] + u[1:]) / 2


def exhaustive_best_tree(features, targets, max_depth: int = 1,
                         threshold_grid: Sequence[Sequence[float]] | None = None,
                         min_leaf: int = 1) -> RegressionTree:
    """Globally MSE-optimal stump by brute force over every (feature, threshold) pair.

    Verification oracle: each candidate's squared error is computed directly
    from the masked rows. ``threshold_grid[j]`` overrides the per-feature
    candidate list (default: midpoints of distinct values).
    """
    if max_depth > 1:
        raise ValueError("exhaustive search supports max_depth <= 1 only")
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("dimension mismatch")
    n, d = X.shape
    mean = float(y.mean())
    leaf = constant_tree(mean, d)
    if max_depth == 0:
        return leaf
    base_sse = float(((y - mean) ** 2).sum())
    best_sse, best = base_sse, None
    for j in range(d):
        grid = candidate_thresholds(X[:, j]) if threshold_grid is None else np.asarray(threshold_grid[j], float)
        for t in np.sort(grid):
            left = X[:, j] < t
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            ml, mr = y[left].mean(), y[~left].mean()
            sse = float(((y[left] - ml) ** 2).sum() + ((y[~left] - mr) ** 2).sum())
            if sse < best_sse - _GAIN_EPS * n:
                best_sse, best = sse, (j, float(t), float(ml), float(mr))
    if best is None:
        return leaf
    j, t, ml, mr = best
    return stump(j, t, ml, mr, d)


def enumerate_stumps(features) -> list[tuple[int, float]]:
    """Every (feature, midpoint threshold) pair present in ``features``."""
    X = np.asarray(features, dtype=float)
    return [(j, float(t)) for j in range(X.shape[1]) for t in candidate_thresholds(X[:, j])]


def random_tree(rng: np.random.Generator, features, max_depth: int) -> RegressionTree:
    """Random probe tree: random splits drawn from the data's midpoints, uniform leaf values."""
    X = np.asarray(features, dtype=float)
    d = X.shape[1]

    def grow(idx, depth):
        if depth >= max_depth or len(idx) < 2:
            return Node(value=float(rng.uniform()))
        j = int(rng.integers(d))
        cands = candidate_thresholds(X[idx, j])
        if cands.size == 0:
            return Node(value=float(rng.uniform()))
        t = float(cands[rng.integers(cands.size)])
        go_left = X[idx, j] < t
        return Node(value=None, feature=j, threshold=t,
                    left=grow(idx[go_left], depth + 1), right=grow(idx[~go_left], depth + 1))

    return RegressionTree(root=grow(np.arange(X.shape[0]), 0), n_features=d, max_depth=max_depth)
