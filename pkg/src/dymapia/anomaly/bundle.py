"""Per-frame assembly of the four modality masks, their union and refinement."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..imgcore import as_frame, mask_or, refine
from .config import AnalyzerConfig
from .edges import edge_mask
from .motion import FlowField, dense_flow, temporal_mask
from .spectral import freq_mask
from .texture import texture_mask

log = logging.getLogger(__name__)

MODALITIES = ("freq", "tex", "edge", "temp")
FIELDS = MODALITIES + ("combined", "refined")


@dataclass
class MaskBundle:
    t: int
    freq: np.ndarray
    tex: np.ndarray
    edge: np.ndarray
    temp: np.ndarray
    combined: np.ndarray
    refined: np.ndarray
    notes: list = field(default_factory=list)

    def masks(self) -> dict:
        return {name: getattr(self, name) for name in FIELDS}

    def modality_masks(self) -> list:
        return [getattr(self, name) for name in MODALITIES]


def _guarded(name, fn, shape, notes):
    try:
        return fn()
    except Exception as exc:  # an analyzer failure never aborts the bundle
        log.warning("%s analyzer failed: %s", name, exc)
        notes.append(f"{name}: failed ({type(exc).__name__}: {exc})")
        return np.zeros(shape, dtype=np.uint8)


def spatial_masks(frame, cfg: AnalyzerConfig, region=None, notes=None):
    notes = notes if notes is not None else []
    shape = frame.shape
    fm = _guarded("freq", lambda: freq_mask(frame, cfg, region), shape, notes)
    tm = _guarded("tex", lambda: texture_mask(frame, cfg, region, notes), shape, notes)
    em = _guarded("edge", lambda: edge_mask(frame, cfg, region, notes), shape, notes)
    return fm, tm, em


def assemble(t, freq, tex, edge, temp, cfg: AnalyzerConfig, notes=None) -> MaskBundle:
    combined = mask_or([freq, tex, edge, temp])
    return MaskBundle(t, freq, tex, edge, temp, combined, refine(combined, cfg.morph_side), notes or [])


def _as_frame_list(seq):
    if hasattr(seq, "frames"):
        return list(seq.frames)
    if isinstance(seq, np.ndarray) and seq.ndim == 2:
        return [seq]
    return list(seq)


def compute_flows(frames, cfg: AnalyzerConfig, jobs: int = 1) -> list:
    pairs = list(zip(frames[:-1], frames[1:]))
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda p: dense_flow(p[0], p[1], cfg), pairs))
    return [dense_flow(a, b, cfg) for a, b in pairs]


def flow_for_frame(flows: list, t: int):
    """Flow attached to frame t: (t, t+1); the last frame reuses (t-1, t)."""
    if not flows:
        return None
    return flows[min(t, len(flows) - 1)]


def frame_bundle(frame, cfg: AnalyzerConfig = AnalyzerConfig(), flow: FlowField | None = None,
                 region=None, t: int = 0) -> MaskBundle:
    """Bundle for one frame; ``flow`` of None means no temporal evidence."""
    frame = as_frame(frame)
    notes = []
    fm, tm, em = spatial_masks(frame, cfg, region, notes)
    if flow is None:
        temp = np.zeros(frame.shape, dtype=np.uint8)
    else:
        temp = _guarded("temp", lambda: temporal_mask(flow, cfg, region), frame.shape, notes)
    return assemble(t, fm, tm, em, temp, cfg, notes)


def build_bundle(seq, cfg: AnalyzerConfig = AnalyzerConfig(), regions=None, jobs: int = 1) -> list:
    """Mask bundles for every frame of a normalized sequence (or a single frame).

    ``regions`` is an optional per-frame list of face masks (or one mask
    shared by all frames) restricting where statistics are gathered.
    """
    frames = [as_frame(f) for f in _as_frame_list(seq)]
    if not frames:
        raise ValueError("build_bundle needs at least one frame")
    if regions is None or (isinstance(regions, np.ndarray) and regions.ndim == 2):
        regions = [regions] * len(frames)
    flows = compute_flows(frames, cfg, jobs)

    def one(t):
        return frame_bundle(frames[t], cfg, flow_for_frame(flows, t), regions[t], t)

    if jobs > 1 and len(frames) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, range(len(frames))))
    return [one(t) for t in range(len(frames))]
