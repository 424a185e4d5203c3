"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools

import numpy as np


def prox_grid_search(w, t, rounds=12, points=2001):
    """Minimize 0.5*(u - w)**2 + t*|u| over a grid that zooms in on the best point."""
    lo, hi = -abs(w) - 1.0, abs(w) + 1.0
    best = 0.0
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        obj = 0.5 * (grid - w) ** 2 + t * np.abs(grid)
        i = int(np.argmin(obj))
        best = grid[i]
        step = grid[1] - grid[0]
        lo, hi = best - 2 * step, best + 2 * step
    return float(best)


def auc_pairs(scores, truth):
    """AUC by enumerating every ordered (relevant, irrelevant) pair with exact fractions."""
    pos = [s for s, t in zip(scores, truth) if t == 1]
    neg = [s for s, t in zip(scores, truth) if t == 0]
    twice_wins = 0
    for p, q in itertools.product(pos, neg):
        twice_wins += 2 if p > q else (1 if p == q else 0)
    return twice_wins / (2 * len(pos) * len(neg))


def fisher_by_hand(column, labels):
    column = [float(v) for v in column]
    classes = sorted(set(labels))
    mu = sum(column) / len(column)
    between = within = 0.0
    for c in classes:
        vals = [v for v, y in zip(column, labels) if y == c]
        mc = sum(vals) / len(vals)
        between += len(vals) * (mc - mu) ** 2
        within += sum((v - mc) ** 2 for v in vals)
    return between / (within + 1e-12)


def mlp_forward_loops(w, W1, b1, W2, b2, x, output="identity"):
    """LassoMLP forward pass written with explicit loops."""
    gated = [w[i] * x[i] for i in range(len(x))]
    hidden = []
    for j in range(len(b1)):
        s = b1[j] + sum(W1[j][i] * gated[i] for i in range(len(gated)))
        hidden.append(max(s, 0.0))
    out = []
    for k in range(len(b2)):
        out.append(b2[k] + sum(W2[k][j] * hidden[j] for j in range(len(hidden))))
    if output == "softmax":
        m = max(out)
        e = [np.exp(v - m) for v in out]
        out = [v / sum(e) for v in e]
    return np.array(out)
