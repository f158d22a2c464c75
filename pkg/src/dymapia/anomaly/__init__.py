"""Modality analyzers: spectral, texture, edge and motion masks."""

from .bundle import FIELDS, MODALITIES, MaskBundle, build_bundle, frame_bundle
from .config import AnalyzerConfig
from .edges import canny, edge_mask
from .motion import FlowField, dense_flow, temporal_mask
from .spectral import Spectrum, fft2d, freq_mask, highpass, ifft2d
from .texture import lbp_codes, texture_mask

__all__ = [
    "AnalyzerConfig",
    "FIELDS",
    "FlowField",
    "MODALITIES",
    "MaskBundle",
    "Spectrum",
    "build_bundle",
    "canny",
    "dense_flow",
    "edge_mask",
    "fft2d",
    "frame_bundle",
    "freq_mask",
    "highpass",
    "ifft2d",
    "lbp_codes",
    "temporal_mask",
    "texture_mask",
]
