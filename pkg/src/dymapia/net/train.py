"""SGD-with-momentum training, evaluation and single-frame prediction."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..imgcore import as_frame, as_mask, mask_apply, resize_bilinear
from . import layers as L
from .model import NetConfig, NetParams, bce_loss, forward, loss_and_grads

log = logging.getLogger(__name__)


SCHEDULES = ("constant", "cosine")


def epoch_lr(cfg: "TrainConfig", epoch: int) -> float:
    """Learning rate for 1-based ``epoch``; cosine decays from ``lr`` towards 0 at the last epoch."""
    if cfg.schedule == "constant" or cfg.epochs <= 1:
        return cfg.lr
    return 0.5 * cfg.lr * (1.0 + math.cos(math.pi * (epoch - 1) / cfg.epochs))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    weight_decay: float = 1e-4
    bn_momentum: float = 0.1
    dropout: float = 0.2
    schedule: str = "constant"

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def append(self, epoch, train_loss, val_loss, val_acc):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.val_acc.append(val_acc)

    def rows(self):
        return list(zip(self.epoch, self.train_loss, self.val_loss, self.val_acc))

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,val_acc"]
        lines += [f"{e},{tl:.10f},{vl:.10f},{va:.10f}" for e, tl, vl, va in self.rows()]
        return "\n".join(lines) + "\n"


class SingleClassError(ValueError):
    pass


def evaluate(params: NetParams, x, y, batch_size: int = 64):
    """Eval-mode mean BCE and accuracy at the 0.5 threshold."""
    probs = predict_batch(params, x, batch_size)
    y = np.asarray(y, dtype=np.float64)
    return bce_loss(probs, y), float(np.mean((probs > 0.5) == (y > 0.5)))


def predict_batch(params: NetParams, x, batch_size: int = 64) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = []
    for i in range(0, len(x), batch_size):
        logit, _, _ = forward(params, x[i : i + batch_size], train=False)
        out.append(L.sigmoid(logit))
    return np.concatenate(out) if out else np.zeros(0)


def train(train_x, train_y, val_x, val_y, net_cfg: NetConfig, cfg: TrainConfig = TrainConfig(), init: NetParams | None = None):
    """Train from ``init`` (or a seeded initialization).

    Returns ``(best_params, history)`` where ``best_params`` is the snapshot
    with the highest validation accuracy (earliest epoch on ties).
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    if len(np.unique(train_y)) < 2:
        raise SingleClassError("training data must contain both real and fake samples")
    params = init.copy() if init is not None else NetParams.init(net_cfg, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    velocity = {k: np.zeros_like(v) for k, v in params.weights.items()}
    history = History()
    best, best_acc = params.copy(), -1.0
    n = len(train_x)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        lr = epoch_lr(cfg, epoch)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch statistics need at least two samples
            loss, grads, new_buffers, _ = loss_and_grads(
                params, train_x[idx], train_y[idx], rng=rng, dropout=cfg.dropout, bn_momentum=cfg.bn_momentum
            )
            for k, g in grads.items():
                velocity[k] = cfg.momentum * velocity[k] + g + cfg.weight_decay * params.weights[k]
                params.weights[k] = params.weights[k] - lr * velocity[k]
            params.buffers.update(new_buffers)
            total += loss * len(idx)
            seen += len(idx)
        val_loss, val_acc = evaluate(params, val_x, val_y)
        history.append(epoch, total / max(seen, 1), val_loss, val_acc)
        log.info("epoch %d train_loss %.4f val_loss %.4f val_acc %.4f", epoch, total / max(seen, 1), val_loss, val_acc)
        if val_acc > best_acc:
            best, best_acc = params.copy(), val_acc
    return best, history


def prepare_input(frame, refined_mask, cfg: NetConfig) -> np.ndarray:
    """Masked frame resized to the network input side, shaped (1, 1, S, S)."""
    masked = mask_apply(as_frame(frame), as_mask(refined_mask))
    side = cfg.input_side
    return resize_bilinear(masked, side, side)[None, None]


def predict(frame, refined_mask, params: NetParams) -> dict:
    refined_mask = as_mask(refined_mask)
    x = prepare_input(frame, refined_mask, params.cfg)
    p = float(predict_batch(params, x)[0])
    return {"probability": p, "label": "fake" if p > 0.5 else "real", "low_evidence": not refined_mask.any()}
