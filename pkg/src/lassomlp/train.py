"""LassoMLP model, its SGD + proximal training loop, and the linear Lasso baseline."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .data import Dataset
from .lassolayer import (
    KickConfig,
    LassoLayer,
    kick,
    lasso_backward,
    lasso_forward,
    masked_forward,
    prox_l1,
    topk_mask,
)
from .tensor import Rng, ShapeError

__all__ = [
    "TrainingDivergedError",
    "TrainConfig",
    "TrainHistory",
    "LassoMLPModel",
    "LinearLassoModel",
    "FeatureReport",
    "build_lassomlp",
    "lassomlp_forward",
    "backprop",
    "sgd_prox_step",
    "train_lassomlp",
    "predict",
    "predict_labels",
    "train_linear_lasso",
    "select_features",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "lassomlp-model"
MODEL_FORMAT_VERSION = 1


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-4
    learning_rate: float = 0.1
    batch_size: int = 80
    epochs: int = 2000
    kick: KickConfig = field(default_factory=KickConfig.disabled)
    seed: int = 0
    hidden_units: int = 100

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.kick.kick_epochs > self.epochs:
            warnings.warn(
                f"kick_epochs={self.kick.kick_epochs} exceeds epochs={self.epochs}; "
                "kicking stays active until the end of training",
                stacklevel=3,
            )

    @property
    def prox_threshold(self):
        return self.learning_rate * self.lam


@dataclass
class TrainHistory:
    # Full objective per epoch: mean data loss over the epoch + lam * ||w||_1.
    loss: list = field(default_factory=list)
    nonzero: list = field(default_factory=list)


@dataclass
class LassoMLPModel:
    lasso: LassoLayer
    layer1: nn.DenseLayer
    layer2: nn.DenseLayer
    loss: str = "mse"

    def __post_init__(self):
        if self.layer1.in_dim != self.lasso.size or self.layer2.in_dim != self.layer1.out_dim:
            raise ShapeError(
                f"inconsistent shapes: lasso {self.lasso.size}, layer1 {self.layer1.weights.shape}, "
                f"layer2 {self.layer2.weights.shape}"
            )
        if self.loss not in nn.LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")

    @property
    def n_in(self):
        return self.lasso.size

    @property
    def n_out(self):
        return self.layer2.out_dim

    def parameters(self):
        return [
            self.lasso.w,
            self.layer1.weights,
            self.layer1.bias,
            self.layer2.weights,
            self.layer2.bias,
        ]


@dataclass
class LinearLassoModel:
    w: np.ndarray
    b: float = 0.0

    def predict(self, x):
        return np.asarray(x, dtype=np.float64) @ self.w + self.b


@dataclass
class FeatureReport:
    scores: np.ndarray
    selected: np.ndarray  # indices in rank order
    k: int
    n_nonzero: int
    # True when fewer than k features have a nonzero score, so part of the
    # selection was filled by the tie-break rule alone.
    degenerate: bool
    n_genuine: int = None
    n_noise: int = None


def build_lassomlp(n_in, n_hidden, n_out, task="regression", rng=None) -> LassoMLPModel:
    """Fresh model: lasso weights at 1, dense layers from ``nn.init_dense``."""
    rng = rng if rng is not None else Rng(0)
    if task == "regression":
        out_act, loss = "identity", "mse"
    elif task == "classification":
        out_act, loss = "softmax", "cross-entropy"
    else:
        raise ValueError(f"unknown task {task!r}")
    layer1 = nn.init_dense(n_in, n_hidden, "relu", rng)
    layer2 = nn.init_dense(n_hidden, n_out, out_act, rng)
    return LassoMLPModel(LassoLayer.ones(n_in), layer1, layer2, loss)


def _forward(model, x):
    h0, c0 = lasso_forward(model.lasso, x)
    h1, c1 = nn.dense_forward(model.layer1, h0)
    out, c2 = nn.dense_forward(model.layer2, h1)
    return out, (c0, c1, c2)


def lassomlp_forward(model: LassoMLPModel, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_in:
        raise ShapeError(f"model expects {model.n_in} inputs, got {x.shape[-1]}")
    return _forward(model, x)[0]


def backprop(model: LassoMLPModel, x, target):
    """Data loss and its gradient for every parameter, in ``parameters()`` order."""
    out, (c0, c1, c2) = _forward(model, x)
    value, g = nn.loss_value_and_grad(model.loss, out, target)
    dW2, db2, g = nn.dense_backward(model.layer2, c2, g)
    dW1, db1, g = nn.dense_backward(model.layer1, c1, g)
    dw, _ = lasso_backward(model.lasso, c0, g)
    return value, [dw, dW1, db1, dW2, db2]


def sgd_prox_step(model: LassoMLPModel, grads, lr, lam):
    """Plain SGD on every parameter, then soft-threshold the lasso weights."""
    for param, grad in zip(model.parameters(), grads):
        param -= lr * grad
    if lam > 0:
        model.lasso.w[:] = prox_l1(model.lasso.w, lr * lam)


def _encode_targets(data: Dataset, n_out):
    if data.is_classification:
        onehot = np.zeros((len(data), n_out))
        onehot[np.arange(len(data)), data.targets] = 1.0
        return onehot
    return np.asarray(data.targets, dtype=np.float64).reshape(len(data), -1)


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_lassomlp(data: Dataset, cfg: TrainConfig, model=None, n_out=None):
    """Train a LassoMLP by minibatch SGD with a proximal L1 step.

    Each epoch: kick zero lasso weights (inside the kick window), reshuffle,
    then for every minibatch take a gradient step on the data loss and
    soft-threshold the lasso weights with ``learning_rate * lam``.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    root = Rng(cfg.seed)
    task = "classification" if data.is_classification else "regression"
    if model is None:
        if n_out is None:
            n_out = max(2, data.n_classes) if data.is_classification else 1
        model = build_lassomlp(data.n_features, cfg.hidden_units, n_out, task, root.child(1))
    elif model.n_in != data.n_features:
        raise ShapeError(f"model expects {model.n_in} features, data has {data.n_features}")
    shuffle_rng = root.child(2)
    kick_rng = root.child(3)

    x_all = data.features
    y_all = _encode_targets(data, model.n_out)
    n = len(data)
    batch = min(cfg.batch_size, n)
    lr, lam = cfg.learning_rate, cfg.lam
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        if epoch < cfg.kick.kick_epochs:
            model.lasso.w[:] = kick(model.lasso.w, cfg.kick, epoch, kick_rng)
        total = 0.0
        for b, rows in enumerate(_minibatches(n, batch, shuffle_rng)):
            value, grads = backprop(model, x_all[rows], y_all[rows])
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {b}")
            sgd_prox_step(model, grads, lr, lam)
            total += value * len(rows)
        history.loss.append(total / n + lam * float(np.abs(model.lasso.w).sum()))
        history.nonzero.append(model.lasso.nonzero_count())
    return model, history


def predict(model: LassoMLPModel, x, mode="raw", k=None):
    """Network output using the trained lasso weights (``raw``) or a top-k mask."""
    x = np.asarray(x, dtype=np.float64)
    if mode == "raw":
        return lassomlp_forward(model, x)
    if mode == "topk":
        if k is None:
            raise ValueError("topk mode needs k")
        mask = topk_mask(model.lasso.w, k)
        h0 = masked_forward(model.lasso, mask, x)
        h1, _ = nn.dense_forward(model.layer1, h0)
        return nn.dense_forward(model.layer2, h1)[0]
    raise ValueError(f"unknown prediction mode {mode!r}")


def predict_labels(model: LassoMLPModel, x, mode="raw", k=None):
    return np.argmax(predict(model, x, mode, k), axis=-1)


def train_linear_lasso(data: Dataset, lam, lr=0.1, epochs=2000, batch_size=80, seed=0):
    """Linear regression with an L1 penalty, trained by the same SGD + prox scheme.

    The intercept is not penalized.
    """
    if data.is_classification:
        raise TypeError("linear lasso expects regression targets")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    rng = Rng(seed).child(2)
    x_all = data.features
    y_all = np.asarray(data.targets, dtype=np.float64)
    n, p = x_all.shape
    batch = min(batch_size, n)
    w = np.zeros(p)
    b = 0.0
    for epoch in range(epochs):
        for bi, rows in enumerate(_minibatches(n, batch, rng)):
            xb = x_all[rows]
            resid = xb @ w + b - y_all[rows]
            loss = float(resid @ resid) / len(rows)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {bi}")
            g = 2.0 * resid / len(rows)
            w = prox_l1(w - lr * (g @ xb), lr * lam)
            b -= lr * float(g.sum())
    return LinearLassoModel(w, b)


def select_features(model, k, provenance=None) -> FeatureReport:
    """Top-k features by ``|w|`` of the lasso weights (lower index wins ties)."""
    w = model.lasso.w if isinstance(model, LassoMLPModel) else np.asarray(model.w)
    scores = np.abs(w)
    mask = topk_mask(w, k)
    selected = np.argsort(-scores, kind="stable")[:k]
    assert np.array_equal(np.sort(selected), mask.indices)
    n_nonzero = int(np.count_nonzero(scores))
    report = FeatureReport(scores, selected, int(k), n_nonzero, n_nonzero < k)
    if provenance is not None:
        prov = np.asarray(provenance)[selected]
        report.n_genuine = int(np.sum(prov == 1))
        report.n_noise = int(np.sum(prov == 0))
    return report


def _layer_dict(layer):
    return {
        "shape": list(layer.weights.shape),
        "activation": layer.activation,
        "weights": layer.weights.ravel().tolist(),
        "bias": layer.bias.tolist(),
    }


def _layer_from(d):
    w = np.asarray(d["weights"], dtype=np.float64).reshape(d["shape"])
    return nn.DenseLayer(w, np.asarray(d["bias"], dtype=np.float64), d["activation"])


def model_to_dict(model: LassoMLPModel):
    for p in model.parameters():
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("refusing to serialize non-finite parameters")
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "loss": model.loss,
        "lasso": {
            "size": model.lasso.size,
            "sigma_in": model.lasso.sigma_in,
            "sigma_out": model.lasso.sigma_out,
            "w": model.lasso.w.tolist(),
        },
        "layer1": _layer_dict(model.layer1),
        "layer2": _layer_dict(model.layer2),
    }


def model_from_dict(d) -> LassoMLPModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    lasso = LassoLayer(
        np.asarray(d["lasso"]["w"], dtype=np.float64),
        d["lasso"]["sigma_in"],
        d["lasso"]["sigma_out"],
    )
    if lasso.size != d["lasso"]["size"]:
        raise ShapeError("lasso size does not match its weight list")
    return LassoMLPModel(lasso, _layer_from(d["layer1"]), _layer_from(d["layer2"]), d["loss"])


def save_model(model: LassoMLPModel, path):
    # json writes floats with repr, which round-trips float64 exactly.
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> LassoMLPModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
