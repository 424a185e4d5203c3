"""The one-to-one L1-switched input layer.

Each input unit ``i`` is connected only to output unit ``i`` through a scalar
weight ``w[i]``. Training drives unhelpful weights to exactly zero with a
soft-threshold (proximal) step after every gradient step; a "kick" occasionally
revives zero weights early in training so a feature is not dropped on the
strength of a few noisy updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import activate, activation_backward
from .tensor import Rng, ShapeError, as_vector

__all__ = [
    "LassoLayer",
    "KickConfig",
    "FeatureMask",
    "lasso_forward",
    "lasso_backward",
    "prox_l1",
    "kick",
    "topk_mask",
    "masked_forward",
]


@dataclass
class LassoLayer:
    w: np.ndarray
    sigma_in: str = "identity"
    sigma_out: str = "identity"

    def __post_init__(self):
        self.w = as_vector(self.w, "lasso weights")
        if self.sigma_in == "softmax" or self.sigma_out == "softmax":
            raise ValueError("lasso layer activations must be elementwise")

    @classmethod
    def ones(cls, n, **kw):
        return cls(np.ones(n), **kw)

    @property
    def size(self):
        return self.w.shape[0]

    def nonzero_count(self):
        return int(np.count_nonzero(self.w))


@dataclass(frozen=True)
class KickConfig:
    kick_epochs: int = 0
    kick_probability: float = 0.0
    kicked_value: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.kick_probability <= 1.0:
            raise ValueError(f"kick probability must be in [0, 1], got {self.kick_probability}")
        if not (np.isfinite(self.kicked_value) and self.kicked_value > 0):
            raise ValueError(f"kicked value must be finite and positive, got {self.kicked_value}")
        if self.kick_epochs < 0:
            raise ValueError("kick_epochs must be >= 0")

    @classmethod
    def disabled(cls):
        return cls(0, 0.0, 0.1)


@dataclass(frozen=True)
class FeatureMask:
    indicator: np.ndarray
    k: int

    @property
    def indices(self):
        return np.flatnonzero(self.indicator)


def _check_len(layer, x):
    if np.shape(x)[-1] != layer.size:
        raise ShapeError(f"lasso layer has {layer.size} units, input has {np.shape(x)[-1]}")


def lasso_forward(layer: LassoLayer, x):
    x = np.asarray(x, dtype=np.float64)
    _check_len(layer, x)
    h = activate(layer.sigma_in, x)
    z = layer.w * h
    y = activate(layer.sigma_out, z)
    return y, (x, h, z, y)


def lasso_backward(layer: LassoLayer, cache, upstream):
    """Gradient of the data loss only; the L1 term is left to ``prox_l1``.

    Returns ``(dw, dx)``. For a batch, ``dw`` is summed over samples.
    """
    x, h, z, y = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != y.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != output shape {y.shape}")
    dz = activation_backward(layer.sigma_out, z, y, upstream)
    dw = dz * h
    if dw.ndim == 2:
        dw = dw.sum(axis=0)
    dh = dz * layer.w
    dx = activation_backward(layer.sigma_in, x, h, dh)
    return dw, dx


def prox_l1(w, threshold):
    """Soft-threshold: ``sign(w) * max(|w| - threshold, 0)``.

    Entries with ``|w| <= threshold`` come out as exact (positive) zeros.
    """
    if threshold < 0:
        raise ValueError(f"prox threshold must be >= 0, got {threshold}")
    w = np.asarray(w, dtype=np.float64)
    mag = np.abs(w) - threshold
    out = np.where(mag > 0, np.sign(w) * mag, 0.0)
    return out + 0.0  # normalizes -0.0


def kick(w, cfg: KickConfig, epoch, rng: Rng):
    """Randomly revive zero weights to +/- kicked_value during early epochs.

    Two uniforms are drawn per weight on every call that is inside the kick
    window, so the stream position does not depend on the sparsity pattern.
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    w = np.asarray(w, dtype=np.float64)
    if epoch >= cfg.kick_epochs or cfg.kick_probability == 0.0:
        return w.copy()
    n = w.shape[0]
    fire = rng.uniform(n) < cfg.kick_probability
    sign = np.where(rng.uniform(n) < 0.5, -1.0, 1.0)
    revive = fire & (w == 0.0)
    return np.where(revive, sign * cfg.kicked_value, w)


def topk_mask(w, k) -> FeatureMask:
    """Indicator of the ``k`` largest ``|w|``; ties go to the lower index."""
    w = as_vector(w)
    n = w.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(-np.abs(w), kind="stable")
    indicator = np.zeros(n)
    indicator[order[:k]] = 1.0
    return FeatureMask(indicator, int(k))


def masked_forward(layer: LassoLayer, mask: FeatureMask, x):
    """Forward pass with the indicator standing in for the weights."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(layer, x)
    if mask.indicator.shape[0] != layer.size:
        raise ShapeError(f"mask has length {mask.indicator.shape[0]}, layer has {layer.size} units")
    return activate(layer.sigma_out, mask.indicator * activate(layer.sigma_in, x))
