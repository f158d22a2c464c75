"""Raster primitives shared by every stage.

Frames are 2-D float64 arrays with intensities in [0, 1]; masks are 2-D
uint8 arrays holding only 0 and 1.  Morphology treats out-of-frame pixels
as 0 for both erosion and dilation, so erosion shrinks at the border.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

MIN_SIDE = 16
LUMA = (0.299, 0.587, 0.114)


class ShapeError(ValueError):
    """Inputs whose dimensions do not line up."""


def as_frame(data, *, min_side: int = 1) -> np.ndarray:
    frame = np.asarray(data, dtype=np.float64)
    if frame.ndim != 2:
        raise ShapeError(f"frame must be 2-D, got shape {frame.shape}")
    if min(frame.shape) < min_side:
        raise ShapeError(f"frame {frame.shape} smaller than {min_side}x{min_side}")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains non-finite values")
    return frame


def as_mask(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be exactly 0 or 1")
    return arr.astype(np.uint8)


def empty_mask(shape) -> np.ndarray:
    return np.zeros(shape, dtype=np.uint8)


def mask_apply(frame, mask) -> np.ndarray:
    """Keep only the pixels selected by ``mask``; everything else becomes 0."""
    frame = as_frame(frame)
    mask = as_mask(mask)
    if frame.shape != mask.shape:
        raise ShapeError(f"frame {frame.shape} vs mask {mask.shape}")
    return frame * mask


def mask_or(masks: Sequence) -> np.ndarray:
    if len(masks) == 0:
        raise ValueError("mask_or needs at least one mask")
    first = as_mask(masks[0])
    out = first.copy()
    for m in masks[1:]:
        m = as_mask(m)
        if m.shape != first.shape:
            raise ShapeError(f"mixed mask dimensions {first.shape} vs {m.shape}")
        out |= m
    return out


def structuring_element(side: int = 3) -> np.ndarray:
    if side < 1 or side % 2 == 0:
        raise ValueError(f"structuring element side must be odd and >= 1, got {side}")
    return np.ones((side, side), dtype=bool)


def erode(mask, se_side: int = 3) -> np.ndarray:
    m = as_mask(mask).astype(bool)
    out = ndimage.binary_erosion(m, structure=structuring_element(se_side), border_value=0)
    return out.astype(np.uint8)


def dilate(mask, se_side: int = 3) -> np.ndarray:
    m = as_mask(mask).astype(bool)
    out = ndimage.binary_dilation(m, structure=structuring_element(se_side), border_value=0)
    return out.astype(np.uint8)


def opening(mask, se_side: int = 3) -> np.ndarray:
    return dilate(erode(mask, se_side), se_side)


def closing(mask, se_side: int = 3) -> np.ndarray:
    # Closing in the zero-extended plane: dilation may spill past the frame,
    # so work on a canvas padded by the SE radius and crop back.
    r = se_side // 2
    m = np.pad(as_mask(mask), r)
    out = erode(dilate(m, se_side), se_side)
    return out[r : out.shape[0] - r, r : out.shape[1] - r]


def refine(mask, se_side: int = 3) -> np.ndarray:
    """Opening then closing: drop specks first, then bridge small gaps."""
    return closing(opening(mask, se_side), se_side)


def to_luma(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]


def read_image(path) -> np.ndarray:
    """Read a PNG/PGM file as a [0, 1] luma frame (ITU-R 601 weights for RGB)."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode.startswith("I;16"):
                return np.asarray(img, dtype=np.float64) / 65535.0
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = to_luma(arr)
    return arr / 255.0


def frame_to_u8(frame) -> np.ndarray:
    frame = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    return np.round(frame * 255.0).astype(np.uint8)


def write_frame(path, frame) -> None:
    Image.fromarray(frame_to_u8(frame), mode="L").save(path)


def write_mask(path, mask) -> None:
    m = as_mask(mask)
    Image.fromarray((m * 255).astype(np.uint8), mode="L").save(path)


def read_mask(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read mask {path}: {exc}") from exc
    return (arr >= 128).astype(np.uint8)


def overlay(frame, mask) -> np.ndarray:
    """RGB uint8 composite: the frame in gray with mask pixels painted red."""
    gray = frame_to_u8(frame)
    rgb = np.stack([gray, gray, gray], axis=-1)
    m = as_mask(mask).astype(bool)
    rgb[m] = (rgb[m] // 2) + np.array([127, 0, 0], dtype=np.uint8)
    return rgb


def write_overlay(path, frame, mask) -> None:
    Image.fromarray(overlay(frame, mask), mode="RGB").save(path)


def resize_bilinear(frame, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment; identity when sizes match."""
    frame = as_frame(frame)
    h, w = frame.shape
    if (h, w) == (out_h, out_w):
        return frame.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(frame, [yy, xx], order=1, mode="nearest")
