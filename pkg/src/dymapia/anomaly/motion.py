"""Horn-Schunck dense flow and local flow-inconsistency masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imgcore import ShapeError, as_frame
from .config import AnalyzerConfig
from .stats import sigma_threshold

_NEIGHBOUR_MEAN = np.array([[0.0, 0.25, 0.0], [0.25, 0.0, 0.25], [0.0, 0.25, 0.0]])


@dataclass(frozen=True)
class FlowField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ShapeError("flow components differ in shape")

    @property
    def shape(self):
        return self.u.shape

    @classmethod
    def zeros(cls, shape) -> "FlowField":
        return cls(np.zeros(shape), np.zeros(shape))


def dense_flow(f_t, f_t1, cfg: AnalyzerConfig = AnalyzerConfig()) -> FlowField:
    """Jacobi iterations of Horn-Schunck from a zero initial field.

    Spatial gradients are central differences of the mean of both frames;
    the temporal gradient is ``f_t1 - f_t``.
    """
    a, b = as_frame(f_t), as_frame(f_t1)
    if a.shape != b.shape:
        raise ShapeError(f"frames differ in shape: {a.shape} vs {b.shape}")
    avg = 0.5 * (a + b)
    iy, ix = np.gradient(avg)
    it = b - a
    denom = cfg.flow_alpha**2 + ix**2 + iy**2
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    for _ in range(cfg.flow_iters):
        u_bar = ndimage.correlate(u, _NEIGHBOUR_MEAN, mode="nearest")
        v_bar = ndimage.correlate(v, _NEIGHBOUR_MEAN, mode="nearest")
        resid = (ix * u_bar + iy * v_bar + it) / denom
        u = u_bar - ix * resid
        v = v_bar - iy * resid
    return FlowField(u, v)


def flow_deviation(flow: FlowField, window: int = 3) -> np.ndarray:
    """Distance of each vector from the componentwise median of its neighbourhood."""
    mu = ndimage.median_filter(flow.u, size=window, mode="nearest")
    mv = ndimage.median_filter(flow.v, size=window, mode="nearest")
    return np.hypot(flow.u - mu, flow.v - mv)


def temporal_mask(flow: FlowField, cfg: AnalyzerConfig = AnalyzerConfig(), region=None) -> np.ndarray:
    if not (np.all(np.isfinite(flow.u)) and np.all(np.isfinite(flow.v))):
        raise ValueError("flow field contains non-finite values")
    dev = flow_deviation(flow, cfg.temp_window)
    return sigma_threshold(dev, cfg.k_sigma_temp, region)
