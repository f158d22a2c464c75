"""DFT high-pass residual analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgcore import as_frame
from .config import AnalyzerConfig
from .stats import sigma_threshold


@dataclass(frozen=True)
class Spectrum:
    """Unnormalized 2-D DFT in DC-centred (fftshift) layout.

    ``orig_shape`` is the frame size before power-of-two zero padding so the
    inverse can crop back.
    """

    values: np.ndarray
    orig_shape: tuple

    @property
    def shape(self):
        return self.values.shape


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def fft2d(frame) -> Spectrum:
    frame = as_frame(frame)
    h, w = frame.shape
    padded = np.zeros((_next_pow2(h), _next_pow2(w)))
    padded[:h, :w] = frame
    return Spectrum(np.fft.fftshift(np.fft.fft2(padded)), (h, w))


def ifft2d(spec: Spectrum) -> np.ndarray:
    """Inverse of :func:`fft2d` (scaled by 1/(m*n)), real part, cropped."""
    field = np.fft.ifft2(np.fft.ifftshift(spec.values))
    h, w = spec.orig_shape
    return field.real[:h, :w]


def radius_grid(shape) -> np.ndarray:
    """Centred radius of every bin as a fraction of the Nyquist radius."""
    m, n = shape
    u = (np.arange(m) - m // 2) / (m / 2.0)
    v = (np.arange(n) - n // 2) / (n / 2.0)
    return np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)


def highpass(spec: Spectrum, t_freq: float) -> Spectrum:
    if not 0.0 < t_freq < 1.0:
        raise ValueError(f"t_freq must lie in (0, 1), got {t_freq}")
    keep = radius_grid(spec.shape) > t_freq
    return Spectrum(np.where(keep, spec.values, 0.0), spec.orig_shape)


def periodic_component(field: np.ndarray) -> np.ndarray:
    """Periodic part of the periodic-plus-smooth split (Moisan 2011).

    Removes the smooth harmonic field that carries the jumps between
    opposite borders, so the DFT does not see a wrap-around seam.
    """
    m, n = field.shape
    jumps = np.zeros_like(field)
    jumps[0, :] += field[-1, :] - field[0, :]
    jumps[-1, :] -= field[-1, :] - field[0, :]
    jumps[:, 0] += field[:, -1] - field[:, 0]
    jumps[:, -1] -= field[:, -1] - field[:, 0]
    q = np.arange(m)[:, None]
    r = np.arange(n)[None, :]
    denom = 2 * np.cos(2 * np.pi * q / m) + 2 * np.cos(2 * np.pi * r / n) - 4
    denom[0, 0] = 1.0
    smooth_hat = np.fft.fft2(jumps) / denom
    smooth_hat[0, 0] = 0.0
    return field - np.fft.ifft2(smooth_hat).real


def highfreq_residual(frame, t_freq: float) -> np.ndarray:
    """|high-pass(frame)| without border seams.

    The frame is mirrored out to the power-of-two transform size and reduced
    to its periodic component first; the residual is cropped back.
    """
    frame = as_frame(frame)
    h, w = frame.shape
    ext = np.pad(frame, ((0, _next_pow2(h) - h), (0, _next_pow2(w) - w)), mode="symmetric")
    residual = ifft2d(highpass(fft2d(periodic_component(ext)), t_freq))
    return np.abs(residual[:h, :w])


def freq_mask(frame, cfg: AnalyzerConfig = AnalyzerConfig(), region=None) -> np.ndarray:
    """Flag pixels whose high-pass residual exceeds mean + k*std over the face."""
    residual = highfreq_residual(frame, cfg.t_freq)
    return sigma_threshold(residual, cfg.k_sigma_freq, region)
