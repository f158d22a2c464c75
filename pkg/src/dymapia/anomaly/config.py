"""Analyzer thresholds and tiling parameters."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class AnalyzerConfig:
    t_freq: float = 0.25
    k_sigma_freq: float = 2.0
    k_sigma_tex: float = 2.0
    k_sigma_edge: float = 2.0
    k_sigma_temp: float = 2.0
    block: int = 16
    canny_sigma: float = 1.4
    canny_lo: float = 0.1
    canny_hi: float = 0.2
    flow_alpha: float = 0.1
    flow_iters: int = 100
    temp_window: int = 7
    morph_side: int = 3

    def __post_init__(self):
        if not 0.0 < self.t_freq < 1.0:
            raise ValueError(f"t_freq must lie in (0, 1), got {self.t_freq}")
        for name in ("k_sigma_freq", "k_sigma_tex", "k_sigma_edge", "k_sigma_temp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.block < 2:
            raise ValueError("block must be at least 2 px")
        if not 0.0 <= self.canny_lo < self.canny_hi:
            raise ValueError("need 0 <= canny_lo < canny_hi")
        if self.canny_sigma <= 0 or self.flow_alpha <= 0:
            raise ValueError("canny_sigma and flow_alpha must be positive")
        if self.flow_iters < 0:
            raise ValueError("flow_iters must be >= 0")
        if self.temp_window < 1 or self.temp_window % 2 == 0:
            raise ValueError("temp_window must be odd and >= 1")
        if self.morph_side < 1 or self.morph_side % 2 == 0:
            raise ValueError("morph_side must be odd and >= 1")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "AnalyzerConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(mapping) - set(known)
        if unknown:
            raise ValueError(f"unknown analyzer config keys: {sorted(unknown)}")
        kw = {}
        for f in fields(cls):
            if f.name in mapping:
                kw[f.name] = int(mapping[f.name]) if f.type in ("int", int) else float(mapping[f.name])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "AnalyzerConfig":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)
