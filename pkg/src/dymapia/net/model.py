"""Mask-guided depthwise-separable classifier: config, parameters, forward and backward."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import layers as L

BCE_EPS = 1e-12


@dataclass(frozen=True)
class NetConfig:
    input_side: int = 256
    stem_channels: int = 32
    block_channels: tuple = (64, 128, 256)
    hidden: int = 1024
    stem_pool: bool = True
    preset: str = "paper"

    def __post_init__(self):
        object.__setattr__(self, "block_channels", tuple(int(c) for c in self.block_channels))
        if len(self.block_channels) != 3:
            raise ValueError("block_channels must have exactly three entries")
        if self.stem_channels < 1 or min(self.block_channels) < 1 or self.hidden < 0:
            raise ValueError("channel counts must be >= 1 (hidden may be 0)")
        if self.input_side % self.downsample != 0:
            raise ValueError(f"input_side {self.input_side} not divisible by {self.downsample}")

    @property
    def downsample(self) -> int:
        return 2 ** (3 + int(self.stem_pool))

    @property
    def feature_side(self) -> int:
        return self.input_side // self.downsample

    @property
    def channels(self) -> tuple:
        return (self.stem_channels,) + self.block_channels

    @classmethod
    def from_preset(cls, name: str, input_side: int = 256, **overrides) -> "NetConfig":
        if name == "paper":
            base = dict(stem_channels=32, block_channels=(64, 128, 256), hidden=1024)
        elif name == "lite":
            base = dict(stem_channels=8, block_channels=(16, 24, 32), hidden=0)
        else:
            raise ValueError(f"unknown preset {name!r}")
        base.update(overrides)
        return cls(input_side=input_side, preset=name, **base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_channels"] = list(self.block_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(**{**d, "block_channels": tuple(d["block_channels"])})


def param_shapes(cfg: NetConfig) -> dict:
    """Trainable parameter shapes in declaration order."""
    c = cfg.channels
    shapes = {
        "stem.w": (c[0], 1, 3, 3),
        "stem.b": (c[0],),
        "stem.gamma": (c[0],),
        "stem.beta": (c[0],),
    }
    for l in (1, 2, 3):
        shapes[f"block{l}.k"] = (c[l - 1], 3, 3)
        shapes[f"block{l}.p"] = (c[l], c[l - 1])
        shapes[f"block{l}.b"] = (c[l],)
        shapes[f"block{l}.gamma"] = (c[l],)
        shapes[f"block{l}.beta"] = (c[l],)
    if cfg.hidden > 0:
        shapes["head.w1"] = (cfg.hidden, c[3])
        shapes["head.b1"] = (cfg.hidden,)
        shapes["head.w2"] = (cfg.hidden,)
    else:
        shapes["head.w2"] = (c[3],)
    shapes["head.b2"] = (1,)
    return shapes


def buffer_shapes(cfg: NetConfig) -> dict:
    c = cfg.channels
    out = {}
    for name, ch in zip(("stem", "block1", "block2", "block3"), c):
        out[f"{name}.mean"] = (ch,)
        out[f"{name}.var"] = (ch,)
    return out


def param_count(cfg: NetConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(cfg).values()))


class NetParams:
    """Trainable weights plus batch-norm running statistics."""

    def __init__(self, cfg: NetConfig, weights: dict, buffers: dict):
        self.cfg = cfg
        self.weights = {k: np.asarray(weights[k], dtype=np.float64) for k in param_shapes(cfg)}
        self.buffers = {k: np.asarray(buffers[k], dtype=np.float64) for k in buffer_shapes(cfg)}
        for k, s in param_shapes(cfg).items():
            if self.weights[k].shape != s:
                raise ValueError(f"{k}: shape {self.weights[k].shape}, expected {s}")
        for k, s in buffer_shapes(cfg).items():
            if self.buffers[k].shape != s:
                raise ValueError(f"{k}: shape {self.buffers[k].shape}, expected {s}")

    @classmethod
    def init(cls, cfg: NetConfig, seed: int = 0) -> "NetParams":
        rng = np.random.default_rng(seed)
        w = {}
        for name, shape in param_shapes(cfg).items():
            kind = name.split(".")[1]
            if kind == "gamma":
                w[name] = np.ones(shape)
            elif kind in ("beta", "b", "b1", "b2"):
                w[name] = np.zeros(shape)
            else:
                fan_in = shape[0] if kind == "w2" else int(np.prod(shape[1:]))
                gain = 1.0 if kind == "w2" else 2.0
                w[name] = rng.standard_normal(shape) * np.sqrt(gain / fan_in)
        bufs = {k: (np.ones(s) if k.endswith(".var") else np.zeros(s)) for k, s in buffer_shapes(cfg).items()}
        return cls(cfg, w, bufs)

    def copy(self) -> "NetParams":
        return NetParams(self.cfg, {k: v.copy() for k, v in self.weights.items()},
                         {k: v.copy() for k, v in self.buffers.items()})

    def __eq__(self, other):
        if not isinstance(other, NetParams) or other.cfg != self.cfg:
            return NotImplemented
        return all(np.array_equal(self.weights[k], other.weights[k]) for k in self.weights) and all(
            np.array_equal(self.buffers[k], other.buffers[k]) for k in self.buffers
        )

    def count(self) -> int:
        return int(sum(v.size for v in self.weights.values()))


def _check_input(x, cfg: NetConfig):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != 1 or x.shape[2:] != (cfg.input_side, cfg.input_side):
        raise ValueError(f"expected input (B, 1, {cfg.input_side}, {cfg.input_side}), got {x.shape}")
    return x


def _bn(z, params, name, train, momentum, new_buffers):
    out, cache, m, v = L.batchnorm_forward(
        z, params.weights[f"{name}.gamma"], params.weights[f"{name}.beta"],
        params.buffers[f"{name}.mean"], params.buffers[f"{name}.var"], train, momentum,
    )
    new_buffers[f"{name}.mean"] = m
    new_buffers[f"{name}.var"] = v
    return out, cache


def _stem(x, params, train, momentum, new_buffers, tape):
    cfg = params.cfg
    z, c_conv = L.conv3x3_forward(x, params.weights["stem.w"], params.weights["stem.b"])
    z, c_bn = _bn(z, params, "stem", train, momentum, new_buffers)
    z, c_relu = L.relu_forward(z)
    c_pool = None
    if cfg.stem_pool:
        z, c_pool = L.maxpool2_forward(z)
    tape.append(("stem", (c_conv, c_bn, c_relu, c_pool)))
    return z


def _block(z, params, l, train, momentum, new_buffers, tape):
    if z.shape[1] != params.cfg.channels[l - 1]:
        raise ValueError(f"block{l} expects {params.cfg.channels[l - 1]} channels, got {z.shape[1]}")
    name = f"block{l}"
    d, c_dw = L.depthwise_forward(z, params.weights[f"{name}.k"])
    y, c_pw = L.pointwise_forward(d, params.weights[f"{name}.p"], params.weights[f"{name}.b"])
    y, c_bn = _bn(y, params, name, train, momentum, new_buffers)
    y, c_relu = L.relu_forward(y)
    y, c_pool = L.maxpool2_forward(y)
    tape.append((name, (c_dw, c_pw, c_bn, c_relu, c_pool)))
    return y


def _head(f, params, train, rng, dropout, tape):
    w = params.weights
    if params.cfg.hidden > 0:
        h, c_d1 = L.dense_forward(f, w["head.w1"], w["head.b1"])
        h, c_relu = L.relu_forward(h)
        keep = None
        if train and dropout > 0:
            rng = rng if rng is not None else np.random.default_rng(0)
            keep = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            h = h * keep
        logit = h @ w["head.w2"] + w["head.b2"][0]
        tape.append(("head", (c_d1, c_relu, keep, h)))
    else:
        logit = f @ w["head.w2"] + w["head.b2"][0]
        tape.append(("head", (None, None, None, f)))
    return logit


def forward(params: NetParams, x, train: bool = False, rng=None, dropout: float = 0.0, bn_momentum: float = 0.1):
    """Full pass to logits.  Returns (logits, tape, new_buffers); ``params`` is not mutated."""
    x = _check_input(x, params.cfg)
    tape = []
    new_buffers = {}
    z = _stem(x, params, train, bn_momentum, new_buffers, tape)
    for l in (1, 2, 3):
        z = _block(z, params, l, train, bn_momentum, new_buffers, tape)
    f, gshape = L.gap_forward(z)
    tape.append(("gap", gshape))
    logit = _head(f, params, train, rng, dropout, tape)
    return logit, tape, new_buffers


def backward(params: NetParams, tape, dlogit) -> dict:
    """Gradients of the loss w.r.t. every trainable parameter, given dL/dlogit."""
    w = params.weights
    grads = {}
    stages = dict(tape)
    c_d1, c_relu, keep, h = stages["head"]
    grads["head.b2"] = np.array([dlogit.sum()])
    grads["head.w2"] = h.T @ dlogit
    dh = np.outer(dlogit, w["head.w2"])
    if params.cfg.hidden > 0:
        if keep is not None:
            dh = dh * keep
        dh = L.relu_backward(dh, c_relu)
        df, grads["head.w1"], grads["head.b1"] = L.dense_backward(dh, c_d1)
    else:
        df = dh
    dz = L.gap_backward(df, stages["gap"])
    for l in (3, 2, 1):
        name = f"block{l}"
        c_dw, c_pw, c_bn, c_relu, c_pool = stages[name]
        dz = L.maxpool2_backward(dz, c_pool)
        dz = L.relu_backward(dz, c_relu)
        dz, grads[f"{name}.gamma"], grads[f"{name}.beta"] = L.batchnorm_backward(dz, c_bn)
        dz, grads[f"{name}.p"], grads[f"{name}.b"] = L.pointwise_backward(dz, c_pw)
        dz, grads[f"{name}.k"] = L.depthwise_backward(dz, c_dw)
    c_conv, c_bn, c_relu, c_pool = stages["stem"]
    if c_pool is not None:
        dz = L.maxpool2_backward(dz, c_pool)
    dz = L.relu_backward(dz, c_relu)
    dz, grads["stem.gamma"], grads["stem.beta"] = L.batchnorm_backward(dz, c_bn)
    _, grads["stem.w"], grads["stem.b"] = L.conv3x3_backward(dz, c_conv, need_dx=False)
    ordered = {k: grads[k] for k in param_shapes(params.cfg)}
    for k, g in ordered.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at {k}")
    return ordered


def loss_and_grads(params: NetParams, x, y, rng=None, dropout: float = 0.0, bn_momentum: float = 0.1):
    """Train-mode BCE and its gradients.  Returns (loss, grads, new_buffers, logits)."""
    logit, tape, new_buffers = forward(params, x, train=True, rng=rng, dropout=dropout, bn_momentum=bn_momentum)
    loss, dlogit = L.bce_with_logits(logit, y)
    return loss, backward(params, tape, dlogit), new_buffers, logit


# Stage-level entry points (evaluation mode unless ``train`` is set).


def stem_forward(x, params: NetParams, train: bool = False):
    return _stem(_check_input(x, params.cfg), params, train, 0.1, {}, [])


def sep_block_forward(z, params: NetParams, l: int, train: bool = False):
    return _block(np.asarray(z, dtype=np.float64), params, l, train, 0.1, {}, [])


def gap(z):
    return L.gap_forward(np.asarray(z, dtype=np.float64))[0]


def head_forward(f, params: NetParams, train: bool = False, rng=None, dropout: float = 0.0):
    """Returns (logits, probabilities)."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] != params.cfg.channels[3]:
        raise ValueError(f"features must be (B, {params.cfg.channels[3]}), got {f.shape}")
    logit = _head(f, params, train, rng, dropout, [])
    return logit, L.sigmoid(logit)


def bce_loss(p, y, eps: float = BCE_EPS) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def predict_proba(params: NetParams, x) -> np.ndarray:
    logit, _, _ = forward(params, x, train=False)
    return L.sigmoid(logit)


def shape_chain(cfg: NetConfig) -> list:
    """(channels, side) after stem and each block, then feature, hidden and output widths."""
    side = cfg.input_side // (2 if cfg.stem_pool else 1)
    chain = [(cfg.stem_channels, side)]
    for c in cfg.block_channels:
        side //= 2
        chain.append((c, side))
    chain.append(cfg.block_channels[-1])
    if cfg.hidden:
        chain.append(cfg.hidden)
    chain.append(1)
    return chain


def config_json(cfg: NetConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)
