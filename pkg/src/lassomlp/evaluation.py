"""Metrics and the select-then-retrain evaluation protocol."""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .forest import ForestConfig, rf_train
from .tensor import ShapeError

__all__ = [
    "FISHER_EPS",
    "auc",
    "auc_bruteforce",
    "accuracy",
    "fisher_score",
    "select_retrain_evaluate",
]

FISHER_EPS = 1e-12


def _auc_inputs(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise ShapeError(f"scores {scores.shape} and truth {truth.shape} must be equal-length vectors")
    if not np.all((truth == 0) | (truth == 1)):
        raise ValueError("truth must be binary")
    pos, neg = scores[truth == 1], scores[truth == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC is undefined unless truth has at least one 1 and one 0")
    return pos, neg


def auc(scores, truth):
    """Probability that a random relevant item outscores a random irrelevant one.

    Ties count one half. Computed by binary search over the sorted negative
    scores, O((n_pos + n_neg) log n_neg).
    """
    pos, neg = _auc_inputs(scores, truth)
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    wins = float(below.sum()) + 0.5 * float((upto - below).sum())
    return wins / (pos.size * neg.size)


def auc_bruteforce(scores, truth):
    """Reference AUC by enumerating every (relevant, irrelevant) pair."""
    pos, neg = _auc_inputs(scores, truth)
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


def accuracy(predicted, actual):
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ShapeError(f"predicted {predicted.shape} and actual {actual.shape} differ")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty label vector")
    return float(np.mean(predicted == actual))


def fisher_score(features, labels):
    """Per-feature ratio of between-class to within-class scatter.

    ``F_j = sum_c n_c (mu_cj - mu_j)**2 / (sum_c n_c var_cj + eps)`` with
    population (1/n_c) class variances.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ShapeError(f"features {x.shape} and labels {y.shape} do not match")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("fisher score needs at least two classes")
    mu = x.mean(axis=0)
    between = np.zeros(x.shape[1])
    within = np.zeros(x.shape[1])
    for c in classes:
        xc = x[y == c]
        n_c = xc.shape[0]
        mu_c = xc.mean(axis=0)
        between += n_c * (mu_c - mu) ** 2
        within += n_c * xc.var(axis=0)
    return between / (within + FISHER_EPS)


def select_retrain_evaluate(train: Dataset, test: Dataset, selected, cfg: ForestConfig = ForestConfig()):
    """Test accuracy of a forest trained on ``train`` restricted to ``selected`` columns."""
    selected = np.asarray(selected, dtype=np.int64)
    if selected.size == 0:
        raise ValueError("no features selected")
    if selected.min() < 0 or selected.max() >= train.n_features:
        raise IndexError(f"selected indices out of range for {train.n_features} features")
    n_classes = max(train.n_classes, test.n_classes)
    forest = rf_train(train.features[:, selected], train.targets, cfg, n_classes=n_classes)
    return accuracy(forest.predict(test.features[:, selected]), test.targets)
