"""Local binary pattern codes and tile-level texture inconsistency."""

from __future__ import annotations

import numpy as np

from ..imgcore import as_frame
from .config import AnalyzerConfig
from .stats import region_bool
from .tiles import MIN_TILES, iter_tiles, paint_tiles

# Clockwise from the top-left neighbour; top-left carries bit 0.
NEIGHBOUR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
CHI2_EPS = 1e-10


def lbp_codes(frame) -> np.ndarray:
    """8-neighbour, radius-1 LBP.  Bit set iff neighbour >= centre; 1-px border is 0."""
    frame = as_frame(frame, min_side=3)
    h, w = frame.shape
    centre = frame[1:-1, 1:-1]
    codes = np.zeros((h, w), dtype=np.int64)
    inner = codes[1:-1, 1:-1]
    for bit, (dy, dx) in enumerate(NEIGHBOUR_OFFSETS):
        neighbour = frame[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        inner |= (neighbour >= centre).astype(np.int64) << bit
    return codes


def interior(shape) -> np.ndarray:
    sel = np.zeros(shape, dtype=bool)
    sel[1:-1, 1:-1] = True
    return sel


def lbp_histogram(codes: np.ndarray, sel: np.ndarray) -> np.ndarray:
    hist = np.bincount(codes[sel], minlength=256).astype(np.float64)
    return hist / max(hist.sum(), 1.0)


def chi2_distance(h: np.ndarray, ref: np.ndarray, eps: float = CHI2_EPS) -> float:
    return float(np.sum((h - ref) ** 2 / (h + ref + eps)))


def texture_mask(frame, cfg: AnalyzerConfig = AnalyzerConfig(), region=None, notes=None) -> np.ndarray:
    """Flag whole tiles whose LBP histogram is far from the face-wide histogram.

    Tiles with fewer than a quarter of a block of usable pixels are not
    scored.  With fewer than four scored tiles the mask is empty and a note
    is appended to ``notes``.
    """
    frame = as_frame(frame, min_side=3)
    codes = lbp_codes(frame)
    usable = interior(frame.shape) & region_bool(frame.shape, region)
    out = np.zeros(frame.shape, dtype=np.uint8)
    if not usable.any():
        return out
    reference = lbp_histogram(codes, usable)
    min_px = max(1, cfg.block * cfg.block // 4)
    tiles, dists = [], []
    for tile in iter_tiles(frame.shape, cfg.block):
        sel = usable[tile.slices]
        if sel.sum() < min_px:
            continue
        tiles.append(tile)
        dists.append(chi2_distance(lbp_histogram(codes[tile.slices], sel), reference))
    if len(tiles) < MIN_TILES:
        if notes is not None:
            notes.append(f"texture: only {len(tiles)} tiles, statistics unreliable")
        return out
    d = np.array(dists)
    mu, sd = d.mean(), d.std()
    if sd <= 1e-12 * max(1.0, mu):
        return out
    flags = d > mu + cfg.k_sigma_tex * sd
    return paint_tiles(frame.shape, tiles, flags) * region_bool(frame.shape, region).astype(np.uint8)
