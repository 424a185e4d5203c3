"""Activations, losses and dense layers with hand-written gradients.

All forward/backward functions accept either a single sample (1-D) or a batch
with samples along the first axis (2-D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Rng, ShapeError

__all__ = [
    "ACTIVATIONS",
    "LOSSES",
    "PROB_FLOOR",
    "activate",
    "activation_backward",
    "activation_derivative",
    "softmax",
    "loss_value_and_grad",
    "DenseLayer",
    "init_dense",
    "dense_forward",
    "dense_backward",
]

ACTIVATIONS = ("identity", "relu", "sigmoid", "softmax")
LOSSES = ("mse", "cross-entropy")

# Probabilities are clamped here before taking logs.
PROB_FLOOR = 1e-12


def _check_activation(kind):
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(kind, z):
    _check_activation(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return _sigmoid(z)
    return softmax(z)


def activation_derivative(kind, z):
    """Elementwise derivative for the pointwise activations.

    The derivative of relu at exactly 0 is taken as 0.
    """
    _check_activation(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind == "identity":
        return np.ones_like(z)
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    raise ValueError("softmax has no elementwise derivative; use activation_backward")


def activation_backward(kind, z, y, upstream):
    """Gradient w.r.t. the pre-activation ``z`` given dL/dy (``y = act(z)``)."""
    if kind == "softmax":
        return y * (upstream - np.sum(upstream * y, axis=-1, keepdims=True))
    if kind == "identity":
        return upstream
    return upstream * activation_derivative(kind, z)


def loss_value_and_grad(kind, prediction, target):
    """Loss and its gradient w.r.t. ``prediction``.

    mse is ``mean((p - t)**2)`` over output units; cross-entropy is
    ``-sum(t * log(p))`` with ``p`` clamped at ``PROB_FLOOR``. For a batch the
    value is averaged over samples and the gradient is scaled to match.
    """
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {t.shape}")
    batch = p.shape[0] if p.ndim == 2 else 1
    if kind == "mse":
        n_out = p.shape[-1]
        diff = p - t
        value = float(np.sum(diff * diff)) / (n_out * batch)
        grad = 2.0 * diff / (n_out * batch)
    elif kind == "cross-entropy":
        clamped = np.maximum(p, PROB_FLOOR)
        value = float(-np.sum(t * np.log(clamped))) / batch
        # Below the floor this is the gradient at the floor, so a softmax
        # output that saturated wrongly can still recover.
        grad = -t / clamped / batch
    else:
        raise ValueError(f"unknown loss {kind!r}; expected one of {LOSSES}")
    return value, grad


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        _check_activation(self.activation)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"dense layer weights {self.weights.shape} and bias {self.bias.shape} are inconsistent"
            )

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


def init_dense(n_in, n_out, activation, rng: Rng) -> DenseLayer:
    """Weights uniform in +/- 1/sqrt(n_in), zero bias.

    Glorot-uniform is about twice as wide for a 256-100-1 net and diverges
    under plain SGD at learning rate 0.1.
    """
    limit = 1.0 / np.sqrt(n_in)
    w = rng.uniform_range(-limit, limit, n_in * n_out).reshape(n_out, n_in)
    return DenseLayer(w, np.zeros(n_out), activation)


def dense_forward(layer: DenseLayer, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.in_dim:
        raise ShapeError(f"dense layer expects {layer.in_dim} inputs, got {x.shape[-1]}")
    z = x @ layer.weights.T + layer.bias
    y = activate(layer.activation, z)
    return y, (x, z, y)


def dense_backward(layer: DenseLayer, cache, upstream):
    """Returns ``(dW, db, dx)``; batch gradients are summed over samples."""
    x, z, y = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != y.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != output shape {y.shape}")
    delta = activation_backward(layer.activation, z, y, upstream)
    if delta.ndim == 1:
        dW = np.outer(delta, x)
        db = delta.copy()
    else:
        dW = delta.T @ x
        db = delta.sum(axis=0)
    dx = delta @ layer.weights
    return dW, db, dx
