"""Forward/backward kernels for the classifier, NCHW float64.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5


def _im2col(x):
    """(B, C, H, W) -> (C*9, B*H*W) rows of the 3x3 zero-padded neighbourhoods."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((c, 9, b, h, w))
    for dy in range(3):
        for dx in range(3):
            cols[:, dy * 3 + dx] = xp[:, :, dy : dy + h, dx : dx + w].transpose(1, 0, 2, 3)
    return cols.reshape(c * 9, b * h * w)


def conv3x3_forward(x, w, b):
    """Dense 3x3 convolution, stride 1, zero padding 1.  w: (out, in, 3, 3)."""
    bsz, _, h, wd = x.shape
    cols = _im2col(x)
    out = w.reshape(w.shape[0], -1) @ cols
    out = out.reshape(w.shape[0], bsz, h, wd).transpose(1, 0, 2, 3) + b[None, :, None, None]
    return np.ascontiguousarray(out), (cols, x.shape, w)


def conv3x3_backward(dout, cache, need_dx: bool = True):
    cols, xshape, w = cache
    bsz, cin, h, wd = xshape
    d2 = dout.transpose(1, 0, 2, 3).reshape(w.shape[0], -1)
    dw = (d2 @ cols.T).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    if not need_dx:
        return None, dw, db
    dcols = (w.reshape(w.shape[0], -1).T @ d2).reshape(cin, 3, 3, bsz, h, wd)
    dxp = np.zeros((bsz, cin, h + 2, wd + 2))
    for dy in range(3):
        for dx in range(3):
            dxp[:, :, dy : dy + h, dx : dx + wd] += dcols[:, dy, dx].transpose(1, 0, 2, 3)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def depthwise_forward(x, k):
    """Per-channel 3x3 convolution, zero padding 1.  k: (channels, 3, 3)."""
    _, _, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            out += k[None, :, dy, dx, None, None] * xp[:, :, dy : dy + h, dx : dx + wd]
    return out, (xp, k)


def depthwise_backward(dout, cache):
    xp, k = cache
    _, _, h, wd = dout.shape
    dk = np.zeros_like(k)
    dxp = np.zeros_like(xp)
    for dy in range(3):
        for dx in range(3):
            dk[:, dy, dx] = (dout * xp[:, :, dy : dy + h, dx : dx + wd]).sum(axis=(0, 2, 3))
            dxp[:, :, dy : dy + h, dx : dx + wd] += k[None, :, dy, dx, None, None] * dout
    return dxp[:, :, 1:-1, 1:-1], dk


def pointwise_forward(x, p, b):
    """1x1 channel mixing.  p: (out, in)."""
    bsz, c, h, w = x.shape
    out = (p @ x.reshape(bsz, c, h * w)).reshape(bsz, p.shape[0], h, w) + b[None, :, None, None]
    return out, (x, p)


def pointwise_backward(dout, cache):
    x, p = cache
    bsz, c, h, w = x.shape
    d3 = dout.reshape(bsz, p.shape[0], h * w)
    x3 = x.reshape(bsz, c, h * w)
    dp = np.einsum("bkp,bcp->kc", d3, x3, optimize=True)
    dx = (p.T @ d3).reshape(x.shape)
    return dx, dp, dout.sum(axis=(0, 2, 3))


def batchnorm_forward(x, gamma, beta, run_mean, run_var, train: bool, momentum: float = 0.1):
    """Spatial batch norm.  Returns (out, cache, new_mean, new_var); inputs are not mutated."""
    if train:
        n = x.shape[0] * x.shape[2] * x.shape[3]
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        xhat = (x - mu[None, :, None, None]) / np.sqrt(var + BN_EPS)[None, :, None, None]
        unbiased = var * n / max(n - 1, 1)
        new_mean = (1 - momentum) * run_mean + momentum * mu
        new_var = (1 - momentum) * run_var + momentum * unbiased
        cache = (xhat, gamma, var)
    else:
        xhat = (x - run_mean[None, :, None, None]) / np.sqrt(run_var + BN_EPS)[None, :, None, None]
        new_mean, new_var = run_mean, run_var
        cache = None
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, cache, new_mean, new_var


def batchnorm_backward(dout, cache):
    xhat, gamma, var = cache
    n = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    dx = (inv_std[None, :, None, None] / n) * (
        n * dxhat
        - dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        - xhat * np.sum(dxhat * xhat, axis=(0, 2, 3))[None, :, None, None]
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, cache):
    return dout * cache


def _quadrants(x):
    return x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2]


def maxpool2_forward(x):
    """2x2 stride-2 max pool.  Ties go to the first element in row-major order."""
    a, b, c, d = _quadrants(x)
    out = np.maximum(np.maximum(a, b), np.maximum(c, d))
    idx = np.where(a == out, 0, np.where(b == out, 1, np.where(c == out, 2, 3))).astype(np.int8)
    return out, (x.shape, idx)


def maxpool2_backward(dout, cache):
    shape, idx = cache
    dx = np.zeros(shape)
    for i, (dy, dxo) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        dx[:, :, dy::2, dxo::2] = np.where(idx == i, dout, 0.0)
    return dx


def gap_forward(z):
    return z.mean(axis=(2, 3)), z.shape


def gap_backward(df, shape):
    _, _, h, w = shape
    return np.broadcast_to(df[:, :, None, None] / (h * w), shape).copy()


def dense_forward(x, w, b):
    """x: (batch, in), w: (out, in)."""
    return x @ w.T + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z, y):
    """Mean binary cross-entropy computed from logits; returns (loss, dloss/dz)."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    loss = np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))))
    return float(loss), (sigmoid(z) - y) / z.shape[0]
