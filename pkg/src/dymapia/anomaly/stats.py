"""Shared mean + k*std anomaly predicate."""

from __future__ import annotations

import numpy as np

from ..imgcore import as_mask

# Below this spread the field is treated as constant.
FLAT_STD = 1e-12


def region_bool(shape, region) -> np.ndarray:
    if region is None:
        return np.ones(shape, dtype=bool)
    r = as_mask(region).astype(bool)
    if r.shape != tuple(shape):
        raise ValueError(f"region {r.shape} does not match field {tuple(shape)}")
    return r


def sigma_threshold(values: np.ndarray, k: float, region=None, two_sided: bool = False) -> np.ndarray:
    sel = region_bool(values.shape, region)
    out = np.zeros(values.shape, dtype=np.uint8)
    vals = values[sel]
    if vals.size == 0:
        return out
    mu, sd = vals.mean(), vals.std()
    if sd <= FLAT_STD * max(1.0, abs(mu)):
        return out
    dev = np.abs(values - mu) if two_sided else values - mu
    out[(dev > k * sd) & sel] = 1
    return out
