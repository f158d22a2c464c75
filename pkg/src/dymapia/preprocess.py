"""Frame ingestion, face segmentation intake, alignment and normalization.

The learned segmenter is replaced by :class:`SegmentationSource`, which reads
precomputed masks or boxes from disk or falls back to a centered ellipse.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imgcore import MIN_SIDE, ShapeError, as_frame, as_mask, mask_apply, read_image, read_mask, resize_bilinear

log = logging.getLogger(__name__)

FRAME_SUFFIXES = (".png", ".pgm", ".ppm")
CANONICAL_LEFT_EYE = (0.35, 0.40)
CANONICAL_RIGHT_EYE = (0.65, 0.40)
MIN_EYE_DISTANCE = 2.0
LANDMARK_NAMES = ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right")


class SequenceGapError(ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"frame sequence has gaps; missing t = {self.missing}")


class AlignmentError(ValueError):
    pass


class SegmentationError(ValueError):
    pass


@dataclass
class FrameSequence:
    frames: list
    fps: float = 25.0

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a frame sequence needs at least one frame")
        self.frames = [as_frame(f) for f in self.frames]
        shape = self.frames[0].shape
        for t, f in enumerate(self.frames):
            if f.shape != shape:
                raise ShapeError(f"frame {t} has shape {f.shape}, expected {shape}")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, t):
        return self.frames[t]

    @property
    def shape(self):
        return self.frames[0].shape


@dataclass(frozen=True)
class Landmarks:
    left_eye: tuple
    right_eye: tuple
    nose: tuple | None = None
    mouth_left: tuple | None = None
    mouth_right: tuple | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Landmarks":
        kw = {k: tuple(float(c) for c in d[k]) for k in LANDMARK_NAMES if k in d}
        return cls(**kw)

    def validate(self, shape) -> None:
        h, w = shape
        for name in LANDMARK_NAMES:
            p = getattr(self, name)
            if p is None:
                continue
            if not (0 <= p[0] <= w - 1 and 0 <= p[1] <= h - 1):
                raise AlignmentError(f"landmark {name}={p} outside {w}x{h} frame")


@dataclass
class SegmentationSource:
    """Where the face mask for each frame comes from.

    ``mode`` is one of ``heuristic-ellipse``, ``bounding-box`` or
    ``external-mask``.  For ``external-mask`` ``path`` is a directory of
    ``%06d.png`` masks; for ``bounding-box`` it is the per-sequence
    annotation JSON (or ``annotations`` may be supplied directly).
    """

    mode: str = "heuristic-ellipse"
    path: str | None = None
    annotations: dict = field(default_factory=dict)

    MODES = ("heuristic-ellipse", "bounding-box", "external-mask")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown segmentation mode {self.mode!r}")
        if self.mode == "bounding-box" and not self.annotations:
            if self.path is None:
                raise ValueError("bounding-box mode needs annotations or a JSON path")
            self.annotations = load_annotations(self.path)
        if self.mode == "external-mask" and self.path is None:
            raise ValueError("external-mask mode needs a mask directory")


def load_annotations(path) -> dict:
    """Read ``[{"t": int, "box": [x,y,w,h]?, "landmarks": {name: [x,y]}?}, ...]`` keyed by t."""
    with open(path) as fh:
        records = json.load(fh)
    if isinstance(records, dict):
        records = [records]
    out = {}
    for rec in records:
        t = int(rec["t"])
        out[t] = rec
    return out


def _frame_index(path: Path) -> int | None:
    m = re.fullmatch(r"(\d+)", path.stem)
    return int(m.group(1)) if m else None


def load_sequence(dir_path, fps: float = 25.0) -> FrameSequence:
    root = Path(dir_path)
    if (root / "frames").is_dir():
        root = root / "frames"
    if not root.is_dir():
        raise OSError(f"frame directory not found: {root}")
    indexed = {}
    for p in root.iterdir():
        if p.suffix.lower() in FRAME_SUFFIXES:
            t = _frame_index(p)
            if t is not None:
                indexed[t] = p
    if not indexed:
        raise OSError(f"no numbered PNG/PGM frames in {root}")
    missing = sorted(set(range(max(indexed) + 1)) - set(indexed))
    if missing:
        raise SequenceGapError(missing)
    frames = [read_image(indexed[t]) for t in range(len(indexed))]
    return FrameSequence(frames, fps=fps)


def ellipse_mask(shape, rx_frac: float = 0.30, ry_frac: float = 0.40) -> np.ndarray:
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    inside = ((xx - cx) / (rx_frac * w)) ** 2 + ((yy - cy) / (ry_frac * h)) ** 2 <= 1.0
    return inside.astype(np.uint8)


def box_mask(shape, box) -> np.ndarray:
    x, y, bw, bh = (int(round(v)) for v in box)
    if bw <= 0 or bh <= 0:
        raise SegmentationError(f"degenerate box {box}")
    m = np.zeros(shape, dtype=np.uint8)
    m[max(y, 0) : max(y + bh, 0), max(x, 0) : max(x + bw, 0)] = 1
    return m


def segment_face(frame, src: SegmentationSource, t: int = 0) -> np.ndarray:
    """Face mask for frame ``t``.  An all-zero result is logged; callers skip such frames."""
    frame = as_frame(frame)
    if src.mode == "heuristic-ellipse":
        mask = ellipse_mask(frame.shape)
    elif src.mode == "bounding-box":
        rec = src.annotations.get(t)
        if rec is None or "box" not in rec:
            raise SegmentationError(f"no bounding box for frame t={t}")
        mask = box_mask(frame.shape, rec["box"])
    else:
        p = Path(src.path) / f"{t:06d}.png"
        if not p.exists():
            raise SegmentationError(f"external mask missing for frame t={t}: {p}")
        mask = read_mask(p)
        if mask.shape != frame.shape:
            raise ShapeError(f"mask {p} has shape {mask.shape}, frame is {frame.shape}")
    if not mask.any():
        log.warning("empty face mask for frame t=%d; frame is skippable", t)
    return mask


def similarity_from_eyes(lm: Landmarks, out_size: int) -> np.ndarray:
    """2x3 matrix mapping source (x, y) to output (x, y) so the eyes land on canonical spots."""
    src = np.array([lm.left_eye, lm.right_eye], dtype=np.float64)
    dst = np.array([CANONICAL_LEFT_EYE, CANONICAL_RIGHT_EYE], dtype=np.float64) * out_size
    if np.hypot(*(src[1] - src[0])) < MIN_EYE_DISTANCE:
        raise AlignmentError("eye distance below 2 px")
    # Solve [a -b tx; b a ty] in least squares over both points.
    rows, rhs = [], []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, -y, 1.0, 0.0])
        rhs.append(u)
        rows.append([y, x, 0.0, 1.0])
        rhs.append(v)
    a, b, tx, ty = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    return np.array([[a, -b, tx], [b, a, ty]])


def warp_similarity(frame, matrix: np.ndarray, out_size: int, order: int = 1) -> np.ndarray:
    """Resample ``frame`` under the forward transform ``matrix``; out-of-source pixels are 0."""
    a, nb, tx = matrix[0]
    b, a2, ty = matrix[1]
    lin = np.array([[a, nb], [b, a2]])
    inv = np.linalg.inv(lin)
    yy, xx = np.mgrid[0:out_size, 0:out_size].astype(np.float64)
    du, dv = xx - tx, yy - ty
    sx = inv[0, 0] * du + inv[0, 1] * dv
    sy = inv[1, 0] * du + inv[1, 1] * dv
    return ndimage.map_coordinates(np.asarray(frame, dtype=np.float64), [sy, sx], order=order, mode="grid-constant", cval=0.0)


def center_crop_resize(frame, out_size: int) -> np.ndarray:
    frame = as_frame(frame)
    h, w = frame.shape
    side = min(h, w)
    y0, x0 = (h - side) // 2, (w - side) // 2
    return resize_bilinear(frame[y0 : y0 + side, x0 : x0 + side], out_size, out_size)


def align(frame, lm: Landmarks | None, out_size: int = 256) -> np.ndarray:
    """Rotate/scale/translate so the eyes sit at canonical positions.

    Without landmarks, or with degenerate ones, falls back to a center crop
    resized to ``out_size``.
    """
    frame = as_frame(frame)
    if lm is None:
        return center_crop_resize(frame, out_size)
    try:
        lm.validate(frame.shape)
        matrix = similarity_from_eyes(lm, out_size)
    except AlignmentError as exc:
        log.warning("alignment failed (%s); using center crop", exc)
        return center_crop_resize(frame, out_size)
    return warp_similarity(frame, matrix, out_size)


def align_mask(mask, lm: Landmarks | None, out_size: int = 256) -> np.ndarray:
    warped = align(as_mask(mask).astype(np.float64), lm, out_size)
    return (warped >= 0.5).astype(np.uint8)


def normalize(frame, region=None) -> np.ndarray:
    """Clipped z-score over the face region, rescaled to span [0, 1].

    Pixels outside ``region`` are set to 0.  A constant face maps to 0.5.
    """
    frame = as_frame(frame)
    sel = np.ones(frame.shape, dtype=bool) if region is None else as_mask(region).astype(bool)
    out = np.zeros_like(frame)
    vals = frame[sel]
    if vals.size == 0:
        return out
    mu, sigma = vals.mean(), vals.std()
    if sigma <= 1e-12 * max(1.0, abs(mu)):
        out[sel] = 0.5
        return out
    z = np.clip((vals - mu) / sigma, -3.0, 3.0)
    lo, hi = z.min(), z.max()
    out[sel] = (z - lo) / (hi - lo)
    return out


@dataclass
class Preprocessed:
    frame: np.ndarray
    region: np.ndarray
    skippable: bool = False


def preprocess_frame(frame, src: SegmentationSource | None = None, t: int = 0,
                     landmarks: Landmarks | None = None, out_size: int | None = None) -> Preprocessed:
    """normalize(align(mask_apply(frame, face))) with the face region carried alongside."""
    frame = as_frame(frame, min_side=MIN_SIDE)
    src = src or SegmentationSource()
    face = segment_face(frame, src, t)
    seg = mask_apply(frame, face)
    if out_size is None and landmarks is None:
        aligned, region = seg, face
    else:
        size = out_size or min(frame.shape)
        aligned = align(seg, landmarks, size)
        region = align_mask(face, landmarks, size)
    return Preprocessed(normalize(aligned, region), region, skippable=not region.any())
