"""Minimal CART regression forest.

Used only as a ground-truth generator for the "forest" synthetic datasets;
it is never one of the compared methods.  Defaults: 20 trees of depth 4,
each grown on a bootstrap resample with sqrt(d) features considered per
split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class _Node:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X, y, features):
    """Split minimizing total child SSE; returns (feature, threshold, gain)."""
    n = y.shape[0]
    total_sse = float(np.sum(y**2) - n * y.mean() ** 2)
    best = (-1, 0.0, 0.0)
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        # prefix sums give left/right SSE for every cut in O(n)
        c1 = np.cumsum(ys)[:-1]
        c2 = np.cumsum(ys**2)[:-1]
        k = np.arange(1, n)
        sse_left = c2 - c1**2 / k
        sse_right = (c2[-1] + ys[-1] ** 2 - c2) - (c1[-1] + ys[-1] - c1) ** 2 / (n - k)
        valid = xs[:-1] < xs[1:]  # cannot cut between equal feature values
        if not np.any(valid):
            continue
        gain = np.where(valid, total_sse - (sse_left + sse_right), -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[2]:
            best = (j, 0.5 * (xs[i] + xs[i + 1]), float(gain[i]))
    return best


def _grow_tree(X, y, depth, max_depth, max_features, rng):
    node = _Node(value=float(y.mean()))
    if depth >= max_depth or y.shape[0] < 2:
        return node
    features = rng.choice(X.shape[1], size=max_features, replace=False)
    feature, threshold, gain = _best_split(X, y, features)
    if feature < 0 or gain <= 0.0:
        return node
    mask = X[:, feature] <= threshold
    node.feature = feature
    node.threshold = threshold
    node.left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, max_features, rng)
    node.right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, max_features, rng)
    return node


def _predict_tree(node, X):
    out = np.empty(X.shape[0])
    idx = np.arange(X.shape[0])
    stack = [(node, idx)]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.value
            continue
        mask = X[rows, nd.feature] <= nd.threshold
        stack.append((nd.left, rows[mask]))
        stack.append((nd.right, rows[~mask]))
    return out


@dataclass
class RandomForestRegressor:
    n_trees: int = 20
    max_depth: int = 4
    _trees: list = field(default_factory=list, repr=False)

    def fit(self, X, y, rng: np.random.Generator):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        n, d = X.shape
        max_features = max(1, int(round(np.sqrt(d))))
        self._trees = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n)
            self._trees.append(
                _grow_tree(X[rows], y[rows], 0, self.max_depth, max_features, rng)
            )
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if not self._trees:
            raise RuntimeError("forest is not fitted")
        return np.mean([_predict_tree(t, X) for t in self._trees], axis=0)
