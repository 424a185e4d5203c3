"""Embedded nonlinear feature selection with an L1-penalized one-to-one input layer."""

from .lassolayer import KickConfig, LassoLayer, prox_l1, topk_mask
from .train import LassoMLPModel, TrainConfig, predict, select_features, train_lassomlp

__version__ = "0.1.0"

__all__ = [
    "KickConfig",
    "LassoLayer",
    "LassoMLPModel",
    "TrainConfig",
    "predict",
    "prox_l1",
    "select_features",
    "topk_mask",
    "train_lassomlp",
]
