"""CART trees on Gini impurity, bagged into a random forest."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

GAIN_EPS = 1e-12


def gini_impurity(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini impurity of an empty node")
    p = counts / total
    return float(1.0 - p @ p)


def best_split(x, y, feature_subset, n_classes: int | None = None):
    """Best Gini split over ``feature_subset``.

    ``y`` holds class indices 0..n_classes-1. Candidate thresholds are the
    midpoints of consecutive distinct sorted values. Returns
    ``(feature, threshold, gain)`` or ``None`` when no split has positive gain.
    Ties go to the lower feature index, then the lower threshold.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    if n < 2:
        return None
    n_classes = n_classes or int(y.max()) + 1
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    total = onehot.sum(axis=0)
    parent = gini_impurity(total)
    if parent <= 0.0:
        return None

    feats = np.array(sorted(int(f) for f in feature_subset), dtype=np.int64)
    order = np.argsort(x[:, feats], axis=0, kind="stable")
    values = np.take_along_axis(x[:, feats], order, axis=0)
    valid = values[1:] > values[:-1]  # (n-1, k): a cut after row i separates distinct values
    if not valid.any():
        return None
    left = np.cumsum(onehot[order], axis=0)[:-1]  # (n-1, k, C)
    right = total - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    weighted = (n_left - (left ** 2).sum(axis=2) / n_left + n_right - (right ** 2).sum(axis=2) / n_right) / n
    gains = np.where(valid, parent - weighted, -np.inf)

    best = None
    best_gain = GAIN_EPS
    for col, f in enumerate(feats):
        g = gains[:, col]
        top = g.max()
        if top > best_gain + GAIN_EPS or (best is None and top > GAIN_EPS):
            # lowest threshold among near-equal maxima
            pos = np.flatnonzero(g >= top - GAIN_EPS)[0]
            v = values[:, col]
            best = (int(f), float(0.5 * (v[pos] + v[pos + 1])), float(g[pos]))
            best_gain = best[2]
    return best


@dataclass(frozen=True)
class Tree:
    """Flat CART tree; node 0 is the root, leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training class counts

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, x) -> np.ndarray:
        """Leaf index reached by each row (rows with value <= threshold go left)."""
        x = np.asarray(x, dtype=np.float64)
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = x[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_index(self, x) -> np.ndarray:
        return np.argmax(self.counts[self.apply(x)], axis=1)


def grow_tree(x, y, n_classes: int, max_features: int, rng: np.random.Generator,
              min_samples_split: int = 2, max_depth: int | None = None) -> Tree:
    n_features = x.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    root = new_node(np.arange(x.shape[0]))
    stack = [(root, np.arange(x.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if idx.size < min_samples_split or (max_depth is not None and depth >= max_depth):
            continue
        if np.count_nonzero(counts[node]) <= 1:
            continue
        if max_features < n_features:
            subset = rng.choice(n_features, size=max_features, replace=False)
        else:
            subset = np.arange(n_features)
        split = best_split(x[idx], y[idx], subset, n_classes)
        if split is None:
            continue
        f, thr, _ = split
        mask = x[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(counts))


@dataclass(frozen=True)
class ForestModel:
    classes: tuple
    trees: tuple
    max_features: int
    seed: int

    def tree_votes(self, x) -> np.ndarray:
        """(n_trees, n_rows) class indices voted by each tree."""
        return np.stack([t.predict_index(x) for t in self.trees])

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        votes = self.tree_votes(x)
        tally = np.zeros((x.shape[0], len(self.classes)), dtype=np.int64)
        for row in votes:
            tally[np.arange(x.shape[0]), row] += 1
        return np.asarray(self.classes)[np.argmax(tally, axis=1)]


def default_max_features(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))


def forest_fit(x, y, trees: int = 200, max_features: int | None = None, seed: int = 0,
               bootstrap: bool = True, min_samples_split: int = 2,
               max_depth: int | None = None) -> ForestModel:
    """Bagged CART ensemble; tree t draws its bootstrap and feature subsets from seed + t."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise SchemaError("x must be (n, d) with one label per row")
    n, d = x.shape
    if max_features is None:
        max_features = default_max_features(d)
    if trees < 1:
        raise ValueError("need at least one tree")
    if not 1 <= max_features <= d:
        raise ValueError(f"max_features must be in [1, {d}], got {max_features}")
    classes = tuple(int(c) for c in np.unique(y))
    yi = np.searchsorted(classes, y)
    grown = []
    for t in range(trees):
        rng = np.random.default_rng(seed + t)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        grown.append(grow_tree(x[idx], yi[idx], len(classes), max_features, rng,
                               min_samples_split=min_samples_split, max_depth=max_depth))
    return ForestModel(classes, tuple(grown), max_features, seed)


def forest_predict(m: ForestModel, x) -> np.ndarray:
    return m.predict(x)
