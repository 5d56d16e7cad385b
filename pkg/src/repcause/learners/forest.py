"""CART trees and bagged forests with per-split feature subsampling.

Split search minimizes the pooled sum of squared errors of the two
children.  For 0/1 targets that is algebraically the same ordering as the
weighted Gini impurity, so one scan serves both the regression and the
classification criterion.
"""
from __future__ import annotations

import numpy as np

from .base import Diagnostics, FittedLearner, as_xy
from ..errors import InvalidSpecError
from .specs import ForestSpec


class _Tree:
    """Flattened tree arrays; children indices -1 mark leaves."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def add_node(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)

    def predict(self, x):
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.left[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            cur = node[idx]
            goes_left = x[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(goes_left, self.left[cur], self.right[cur])
            active = self.left[node] >= 0
        return self.value[node]


def _best_split(x_node, y_node, feats, min_leaf):
    """Best (feature, threshold) over candidate features, or None.

    Thresholds are midpoints between consecutive distinct sorted values;
    both children must keep at least ``min_leaf`` rows.
    """
    m = x_node.shape[0]
    xf = x_node[:, feats]
    order = np.argsort(xf, axis=0, kind="stable")
    xs = np.take_along_axis(xf, order, axis=0)
    ys = y_node[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    total, total_sq = csum[-1], csq[-1]

    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    sum_left = csum[:-1]
    sq_left = csq[:-1]
    n_right = m - n_left
    sse = (sq_left - sum_left**2 / n_left) + (
        (total_sq - sq_left) - (total - sum_left) ** 2 / n_right
    )
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    sse = np.where(valid, sse, np.inf)
    flat = int(np.argmin(sse))
    i, j = divmod(flat, sse.shape[1])
    if not np.isfinite(sse[i, j]):
        return None
    threshold = 0.5 * (xs[i, j] + xs[i + 1, j])
    return int(feats[j]), float(threshold)


def _grow_tree(x, y, spec: ForestSpec, rng) -> _Tree:
    n, d = x.shape
    m_try = max(1, int(np.sqrt(d)))
    tree = _Tree()
    root = tree.add_node(float(y.mean()))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node_id, rows, depth = stack.pop()
        y_node = y[rows]
        tree.value[node_id] = float(y_node.mean())
        if (
            len(rows) < 2 * spec.min_leaf
            or (spec.max_depth is not None and depth >= spec.max_depth)
            or np.all(y_node == y_node[0])
        ):
            continue
        feats = rng.choice(d, size=m_try, replace=False)
        split = _best_split(x[rows], y_node, feats, spec.min_leaf)
        if split is None:
            continue
        feat, threshold = split
        goes_left = x[rows, feat] <= threshold
        left_id = tree.add_node(0.0)
        right_id = tree.add_node(0.0)
        tree.feature[node_id] = feat
        tree.threshold[node_id] = threshold
        tree.left[node_id] = left_id
        tree.right[node_id] = right_id
        stack.append((left_id, rows[goes_left], depth + 1))
        stack.append((right_id, rows[~goes_left], depth + 1))
    tree.finalize()
    return tree


class ForestModel(FittedLearner):
    def __init__(self, spec, trees, n_features, diagnostics):
        super().__init__(spec, n_features, diagnostics)
        self.trees = trees

    def _predict(self, x):
        preds = np.zeros(x.shape[0])
        for tree in self.trees:
            preds += tree.predict(x)
        return preds / len(self.trees)


def fit_forest(x, target, spec: ForestSpec) -> ForestModel:
    """Bootstrap-aggregated CART trees; tree t uses seed ``spec.seed + t``."""
    x, target = as_xy(x, target)
    if spec.task == "classification" and not np.all(np.isin(target, (0.0, 1.0))):
        raise InvalidSpecError("classification targets must be 0/1")
    n = x.shape[0]
    trees = []
    for t in range(spec.n_trees):
        rng = np.random.default_rng(spec.seed + t)
        rows = rng.integers(0, n, size=n) if spec.bootstrap else np.arange(n)
        trees.append(_grow_tree(x[rows], target[rows], spec, rng))
    model = ForestModel(spec, trees, x.shape[1], Diagnostics(0.0, spec.n_trees, True))
    in_sample = model._predict(x)
    model.diagnostics = Diagnostics(float(np.mean((in_sample - target) ** 2)),
                                    spec.n_trees, True)
    return model
