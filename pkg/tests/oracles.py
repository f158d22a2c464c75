"""Slow, obviously-correct reference implementations used only by the tests."""

import numpy as np


def naive_dft_shifted(frame):
    """Double-sum DFT, rows/cols ordered from -M/2 to M/2-1 (DC-centred)."""
    m, n = frame.shape
    out = np.zeros((m, n), dtype=complex)
    xs = np.arange(m)[:, None]
    ys = np.arange(n)[None, :]
    for i in range(m):
        u = i - m // 2
        for j in range(n):
            v = j - n // 2
            out[i, j] = np.sum(frame * np.exp(-2j * np.pi * (u * xs / m + v * ys / n)))
    return out


def brute_lbp(frame):
    h, w = frame.shape
    order = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
    codes = np.zeros((h, w), dtype=np.int64)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            c = 0
            for bit, (dy, dx) in enumerate(order):
                if frame[y + dy, x + dx] >= frame[y, x]:
                    c += 1 << bit
            codes[y, x] = c
    return codes


def block_match(a, b, y, x, size=8, search=2):
    """Integer displacement (dx, dy) of the block at (y, x) in ``a`` that best matches ``b``."""
    ref = a[y : y + size, x : x + size]
    best, arg = np.inf, (0, 0)
    for dy in range(-search, search + 1):
        for dx in range(-search, search + 1):
            cand = b[y + dy : y + dy + size, x + dx : x + dx + size]
            ssd = float(np.sum((cand - ref) ** 2))
            if ssd < best:
                best, arg = ssd, (dx, dy)
    return arg


def conv2d_naive(x, w, b):
    """Zero-padded 3x3 convolution by six nested loops.  x: (B,C,H,W), w: (O,C,3,3)."""
    bsz, cin, h, wd = x.shape
    cout = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((bsz, cout, h, wd))
    for n in range(bsz):
        for o in range(cout):
            for i in range(h):
                for j in range(wd):
                    acc = b[o]
                    for c in range(cin):
                        for di in range(3):
                            for dj in range(3):
                                acc += w[o, c, di, dj] * xp[n, c, i + di, j + dj]
                    out[n, o, i, j] = acc
    return out


def depthwise_naive(x, k):
    bsz, c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(x)
    for n in range(bsz):
        for ch in range(c):
            for i in range(h):
                for j in range(wd):
                    out[n, ch, i, j] = np.sum(k[ch] * xp[n, ch, i : i + 3, j : j + 3])
    return out


def numeric_grad(f, arr, eps=1e-5):
    """Central differences of scalar ``f()`` with respect to every entry of ``arr`` (in place)."""
    g = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + eps
        hi = f()
        arr[idx] = old - eps
        lo = f()
        arr[idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def grads_agree(analytic, numeric, rtol=1e-4, floor=1e-8):
    """Relative error below ``rtol``, or both essentially zero (structurally dead parameters)."""
    diff = np.linalg.norm(analytic - numeric)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return diff <= rtol * scale or diff <= floor


def rel_error(analytic, numeric):
    diff = np.linalg.norm(analytic - numeric)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return 0.0 if scale == 0 else diff / scale
