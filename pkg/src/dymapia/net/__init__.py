"""Mask-guided depthwise-separable classifier."""

from .model import (
    NetConfig,
    NetParams,
    backward,
    bce_loss,
    forward,
    gap,
    head_forward,
    loss_and_grads,
    param_count,
    sep_block_forward,
    shape_chain,
    stem_forward,
)
from .train import History, TrainConfig, evaluate, predict, predict_batch, train

__all__ = [
    "History",
    "NetConfig",
    "NetParams",
    "TrainConfig",
    "backward",
    "bce_loss",
    "evaluate",
    "forward",
    "gap",
    "head_forward",
    "loss_and_grads",
    "param_count",
    "predict",
    "predict_batch",
    "sep_block_forward",
    "shape_chain",
    "stem_forward",
    "train",
]
