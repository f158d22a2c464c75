"""Canny edge map and tile-level edge density anomalies."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..imgcore import as_frame
from .config import AnalyzerConfig
from .stats import region_bool
from .tiles import MIN_TILES, iter_tiles, paint_tiles


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def gaussian_blur(frame, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(frame, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def sobel_gradients(frame):
    gx = ndimage.sobel(frame, axis=1, mode="nearest")
    gy = ndimage.sobel(frame, axis=0, mode="nearest")
    return gx, gy


# (dy, dx) step along the gradient for each quantized direction: 0, 45, 90, 135 degrees.
_STEPS = ((0, 1), (1, 1), (1, 0), (1, -1))


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges along the quantized gradient direction.

    A pixel survives when it is >= its backward neighbour and strictly > its
    forward neighbour, so a symmetric two-pixel plateau keeps exactly one.
    """
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    padded = np.pad(mag, 1)
    h, w = mag.shape
    out = np.zeros_like(mag)
    for s, (dy, dx) in enumerate(_STEPS):
        fwd = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        back = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        keep = (sector == s) & (mag >= back) & (mag > fwd) & (mag > 0)
        out[keep] = mag[keep]
    return out


def hysteresis(thin: np.ndarray, lo: float, hi: float) -> np.ndarray:
    strong = thin >= hi
    weak = thin >= lo
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(thin.shape, dtype=np.uint8)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels].astype(np.uint8)


def canny(frame, cfg: AnalyzerConfig = AnalyzerConfig()) -> np.ndarray:
    frame = as_frame(frame)
    smooth = gaussian_blur(frame, cfg.canny_sigma)
    gx, gy = sobel_gradients(smooth)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 1e-12:
        return np.zeros(frame.shape, dtype=np.uint8)
    thin = non_max_suppression(mag, gx, gy)
    return hysteresis(thin, cfg.canny_lo * peak, cfg.canny_hi * peak)


def edge_mask(frame, cfg: AnalyzerConfig = AnalyzerConfig(), region=None, notes=None) -> np.ndarray:
    """Flag tiles whose edge density is unusually high or unusually low."""
    frame = as_frame(frame)
    edges = canny(frame, cfg)
    usable = region_bool(frame.shape, region)
    out = np.zeros(frame.shape, dtype=np.uint8)
    min_px = max(1, cfg.block * cfg.block // 4)
    tiles, dens = [], []
    for tile in iter_tiles(frame.shape, cfg.block):
        sel = usable[tile.slices]
        n = int(sel.sum())
        if n < min_px:
            continue
        tiles.append(tile)
        dens.append(edges[tile.slices][sel].sum() / n)
    if len(tiles) < MIN_TILES:
        if notes is not None:
            notes.append(f"edge: only {len(tiles)} tiles, statistics unreliable")
        return out
    rho = np.array(dens)
    mu, sd = rho.mean(), rho.std()
    if sd <= 1e-12:
        return out
    flags = np.abs(rho - mu) > cfg.k_sigma_edge * sd
    return paint_tiles(frame.shape, tiles, flags) * usable.astype(np.uint8)
