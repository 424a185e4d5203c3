"""Random forest of CART classification trees (Gini impurity), numpy only."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Rng, ShapeError

__all__ = ["ForestConfig", "Tree", "RandomForest", "gini", "build_tree", "rf_train", "rf_predict"]


def gini(counts):
    """Gini impurity of a vector of class counts."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    # "sqrt" -> floor(sqrt(d)), at least 1; an int is used as-is.
    max_features: object = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    def n_candidates(self, d):
        if self.max_features == "sqrt":
            return max(1, int(np.floor(np.sqrt(d))))
        if self.max_features in (None, "all"):
            return d
        return max(1, min(d, int(self.max_features)))


@dataclass
class Tree:
    # Parallel node arrays; feature == -1 marks a leaf.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training class counts per node

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def apply(self, x):
        """Leaf index reached by each row of ``x``."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = x[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, x):
        # argmax picks the lowest class on ties.
        return np.argmax(self.counts[self.apply(x)], axis=1)


def _best_split(xf, y_onehot):
    """Best Gini split of one feature. Returns (weighted_impurity, threshold) or None."""
    order = np.argsort(xf, kind="stable")
    xs = xf[order]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    left = np.cumsum(y_onehot[order], axis=0)[:-1]
    total = left[-1] + y_onehot[order[-1]]
    right = total - left
    n_left = np.arange(1, xs.shape[0], dtype=np.float64)
    n_right = xs.shape[0] - n_left
    # n * gini = n - sum(counts**2) / n
    imp = (n_left - np.sum(left * left, axis=1) / n_left) + (n_right - np.sum(right * right, axis=1) / n_right)
    imp = np.where(valid, imp, np.inf)
    pos = int(np.argmin(imp))
    thr = 0.5 * (xs[pos] + xs[pos + 1])
    if not thr < xs[pos + 1]:
        # midpoint rounded up onto the right value
        thr = xs[pos]
    return float(imp[pos]), float(thr)


def build_tree(x, y, n_classes, n_candidates, rng: Rng) -> Tree:
    """Grow a CART tree until nodes are pure or hold fewer than 2 samples.

    At each node, candidate features are visited in a random order in blocks
    of ``n_candidates``; the search only continues past the first block when
    none of its features can split the node.
    """
    n, d = x.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(onehot[rows].sum(axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n))]
    while stack:
        node, rows = stack.pop()
        c = counts[node]
        if rows.shape[0] < 2 or np.count_nonzero(c) <= 1:
            continue
        order = rng.permutation(d)
        best = None
        for start in range(0, d, n_candidates):
            for f in order[start:start + n_candidates]:
                res = _best_split(x[rows, f], onehot[rows])
                if res is not None and (best is None or res[0] < best[0]):
                    best = (res[0], res[1], int(f))
            if best is not None:
                break
        if best is None:
            continue
        _, thr, f = best
        mask = x[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        l_rows, r_rows = rows[mask], rows[~mask]
        left[node] = new_node(l_rows)
        right[node] = new_node(r_rows)
        stack.append((right[node], r_rows))
        stack.append((left[node], l_rows))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.float64).reshape(-1, n_classes),
    )


@dataclass
class RandomForest:
    trees: list
    n_features: int
    n_classes: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_features:
            raise ShapeError(f"forest was trained on {self.n_features} features, got {x.shape[1]}")
        votes = np.zeros((x.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(x.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict(x)), 1)
        # majority vote, ties to the lowest class index
        pred = np.argmax(votes, axis=1)
        return int(pred[0]) if single else pred


def rf_train(features, labels, cfg: ForestConfig = ForestConfig(), n_classes=None) -> RandomForest:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("random forest needs a non-empty 2-D feature matrix")
    if y.shape != (x.shape[0],):
        raise ShapeError(f"{x.shape[0]} rows but {y.shape} labels")
    n_classes = n_classes or int(y.max()) + 1
    n, d = x.shape
    m = cfg.n_candidates(d)
    root = Rng(cfg.seed)
    trees = []
    for t in range(cfg.n_trees):
        rng = root.child(t)
        rows = rng.integers(0, n, n) if cfg.bootstrap else np.arange(n)
        trees.append(build_tree(x[rows], y[rows], n_classes, m, rng))
    return RandomForest(trees, d, n_classes, cfg)


def rf_predict(forest: RandomForest, x):
    return forest.predict(x)
