"""Deterministic synthetic manipulation corpus with exact ground-truth masks.

Source sequences are procedurally rendered face-like textures drifting a
fixed step per frame.  Fakes are produced by four manipulations, each aimed
at one analyzer: ``splice`` (edges), ``blur_region`` (texture),
``spectral_perturb`` (frequency) and ``temporal_jitter`` (motion).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .anomaly import AnalyzerConfig, dense_flow, frame_bundle
from .imgcore import as_frame, mask_apply, read_image, read_mask, write_frame, write_mask
from .preprocess import FrameSequence, normalize

KINDS = ("splice", "blur_region", "spectral_perturb", "temporal_jitter")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle or inscribed ellipse, in pixels."""

    x: int
    y: int
    w: int
    h: int
    shape: str = "rect"

    def mask(self, frame_shape) -> np.ndarray:
        fh, fw = frame_shape
        if self.x < 0 or self.y < 0 or self.x + self.w > fw or self.y + self.h > fh or self.w < 1 or self.h < 1:
            raise ValueError(f"region {self} exceeds {fw}x{fh} frame")
        m = np.zeros(frame_shape, dtype=np.uint8)
        if self.shape == "rect":
            m[self.y : self.y + self.h, self.x : self.x + self.w] = 1
        elif self.shape == "ellipse":
            yy, xx = np.mgrid[0:fh, 0:fw]
            cy, cx = self.y + (self.h - 1) / 2.0, self.x + (self.w - 1) / 2.0
            inside = ((xx - cx) / (self.w / 2.0)) ** 2 + ((yy - cy) / (self.h / 2.0)) ** 2 <= 1.0
            m[inside] = 1
        else:
            raise ValueError(f"unknown region shape {self.shape!r}")
        return m


@dataclass(frozen=True)
class ManipulationSpec:
    kind: str
    region: Region
    strength: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manipulation {self.kind!r}")
        if not self.strength > 0:
            raise ValueError("strength must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "region": asdict(self.region), "strength": self.strength, "seed": self.seed}


def _feather_alpha(region: Region, frame_shape, feather: int) -> np.ndarray:
    """1 inside the region's core, ramping linearly to 0 across the feather band."""
    inside = region.mask(frame_shape).astype(bool)
    if feather <= 0:
        return inside.astype(np.float64)
    dist = ndimage.distance_transform_edt(inside)
    return np.clip(dist / (feather + 1), 0.0, 1.0) * inside


def splice(base, donor, region: Region, feather: int = 0):
    """Alpha-blend the donor's content at ``region`` into the base frame."""
    base = as_frame(base)
    donor = as_frame(donor)
    if donor.shape[0] < region.y + region.h or donor.shape[1] < region.x + region.w:
        raise ValueError("donor smaller than the splice region")
    gt = region.mask(base.shape)
    alpha = _feather_alpha(region, base.shape, feather)
    donor_full = np.zeros_like(base)
    sl = (slice(region.y, region.y + region.h), slice(region.x, region.x + region.w))
    donor_full[sl] = donor[sl]
    out = base.copy()
    sel = gt.astype(bool)
    out[sel] = (1 - alpha[sel]) * base[sel] + alpha[sel] * donor_full[sel]
    return out, gt


def blur_region(frame, region: Region, strength: float):
    """Gaussian blur (sigma = strength) confined to the region."""
    frame = as_frame(frame)
    gt = region.mask(frame.shape)
    if strength <= 0:
        return frame.copy(), gt
    blurred = ndimage.gaussian_filter(frame, strength, mode="nearest")
    out = frame.copy()
    sel = gt.astype(bool)
    out[sel] = blurred[sel]
    return out, gt


def spectral_perturb(frame, region: Region, strength: float, seed: int = 0):
    """Add seeded checkerboard-modulated noise (near-Nyquist energy) inside the region."""
    frame = as_frame(frame)
    gt = region.mask(frame.shape)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0 : frame.shape[0], 0 : frame.shape[1]]
    checker = np.where((yy + xx) % 2 == 0, 1.0, -1.0)
    noise = checker * (0.5 + 0.5 * rng.random(frame.shape)) * strength
    out = frame.copy()
    sel = gt.astype(bool)
    out[sel] = frame[sel] + noise[sel]
    return out, gt


def temporal_jitter(frames, t: int, region: Region, strength: float):
    """Displace the region's content in frame ``t`` by ``strength`` px along x.

    Returns the modified frame list (only frame ``t`` changes) and the mask.
    """
    frames = [as_frame(f) for f in frames]
    if len(frames) < 2:
        raise ValueError("temporal_jitter needs a sequence of at least two frames")
    src = frames[t]
    gt = region.mask(src.shape)
    shift = int(round(strength))
    moved = np.roll(src, shift, axis=1)
    out = src.copy()
    sel = gt.astype(bool)
    out[sel] = moved[sel]
    frames = list(frames)
    frames[t] = out
    return frames, gt


def render_source(seed: int, side: int = 128, n_frames: int = 8, step=(1, 0)) -> FrameSequence:
    """Face-like procedural texture drifting ``step`` px per frame (integer, no resampling)."""
    rng = np.random.default_rng(seed)
    margin = abs(step[0]) * n_frames + abs(step[1]) * n_frames + 4
    size = side + 2 * margin
    shading = ndimage.gaussian_filter(rng.standard_normal((size, size)), size / 8, mode="wrap")
    shading = shading / (np.abs(shading).max() + 1e-12)
    grain = rng.uniform(0.6, 1.4)
    skin = ndimage.gaussian_filter(rng.standard_normal((size, size)), grain, mode="wrap")
    skin = skin / (skin.std() + 1e-12) * rng.uniform(0.04, 0.09)
    yy, xx = np.mgrid[0:size, 0:size] / size
    light = rng.uniform(-0.15, 0.15) * (xx - 0.5) + rng.uniform(-0.15, 0.15) * (yy - 0.5)
    canvas = 0.5 + 0.15 * shading + light + skin
    for cx, cy, rx, ry in ((0.38, 0.42, 0.06, 0.03), (0.62, 0.42, 0.06, 0.03), (0.5, 0.68, 0.11, 0.035)):
        cx += rng.uniform(-0.02, 0.02)
        cy += rng.uniform(-0.02, 0.02)
        feature = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        canvas[ndimage.gaussian_filter(feature.astype(float), 1.0) > 0.5] -= 0.18
    canvas = np.clip(canvas, 0.0, 1.0)
    frames = []
    for t in range(n_frames):
        oy, ox = margin - step[1] * t, margin - step[0] * t
        frames.append(canvas[oy : oy + side, ox : ox + side].copy())
    return FrameSequence(frames)


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 200
    side: int = 128
    seed: int = 0
    n_sources: int = 8
    frames_per_source: int = 8
    region_min: int = 28
    region_max: int = 44
    feather: int = 2
    blur_strength: float = 2.5
    spectral_strength: float = 0.12
    jitter_strength: float = 4.0
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("need at least one sample per class (both classes required)")
        if self.region_max > self.side // 2 or self.region_min < 4 or self.region_min > self.region_max:
            raise ValueError("invalid region size range")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["analyzer"] = self.analyzer.to_dict()
        return d


@dataclass
class Sample:
    index: int
    label: int
    split: str
    frame: np.ndarray
    input: np.ndarray
    gt: np.ndarray
    refined: np.ndarray
    source: int
    t: int
    spec: ManipulationSpec | None = None
    recalls: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "index": self.index,
            "label": "fake" if self.label else "real",
            "split": self.split,
            "source": self.source,
            "t": self.t,
            "manipulation": self.spec.to_dict() if self.spec else None,
        }


@dataclass
class LabeledDataset:
    samples: list
    cfg: SynthConfig

    def subset(self, split: str) -> list:
        return [s for s in self.samples if s.split == split]

    def arrays(self, split: str):
        subset = self.subset(split)
        x = np.stack([s.input for s in subset])[:, None]
        y = np.array([s.label for s in subset], dtype=np.float64)
        return x, y

    def counts(self) -> dict:
        out = {}
        for split in SPLITS:
            subset = self.subset(split)
            out[split] = {"real": sum(1 for s in subset if not s.label), "fake": sum(1 for s in subset if s.label)}
        return out

    def manifest(self) -> dict:
        return {
            "seed": self.cfg.seed,
            "config": self.cfg.to_dict(),
            "counts": self.counts(),
            "samples": [s.record() for s in self.samples],
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"


def _random_region(rng, side: int, lo: int, hi: int) -> Region:
    w = int(rng.integers(lo, hi + 1))
    h = int(rng.integers(lo, hi + 1))
    pad = side // 8
    x = int(rng.integers(pad, side - pad - w + 1))
    y = int(rng.integers(pad, side - pad - h + 1))
    return Region(x, y, w, h)


def manipulate(kind: str, f_t, f_t1, donor, region: Region, cfg: SynthConfig, seed: int):
    """Manipulate ``f_t`` (its successor is left alone); returns (frame_t, frame_t1, gt, spec)."""
    if kind == "splice":
        out, gt = splice(f_t, donor, region, cfg.feather)
        strength = float(max(cfg.feather, 1))
    elif kind == "blur_region":
        out, gt = blur_region(f_t, region, cfg.blur_strength)
        strength = cfg.blur_strength
    elif kind == "spectral_perturb":
        out, gt = spectral_perturb(f_t, region, cfg.spectral_strength, seed)
        strength = cfg.spectral_strength
    else:
        jittered, gt = temporal_jitter([f_t, f_t1], 0, region, cfg.jitter_strength)
        out = jittered[0]
        strength = cfg.jitter_strength
    return out, f_t1, gt, ManipulationSpec(kind, region, strength, seed)


def _assign_splits(n: int, rng) -> list:
    n_train = int(round(0.70 * n))
    n_val = int(round(0.15 * n))
    tags = ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)
    return [str(tag) for tag in rng.permutation(tags)]


def default_sources(cfg: SynthConfig) -> list:
    steps = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1))
    return [
        render_source(cfg.seed * 1000 + i, cfg.side, cfg.frames_per_source, steps[i % len(steps)])
        for i in range(cfg.n_sources)
    ]


def make_dataset(sources: list | None = None, cfg: SynthConfig = SynthConfig()) -> LabeledDataset:
    """N real and N fake samples, 70/15/15 split per class, network inputs per masked frame."""
    sources = sources if sources is not None else default_sources(cfg)
    if len(sources) < 2:
        raise ValueError("make_dataset needs at least two source sequences")
    for s in sources:
        if len(s) < 2:
            raise ValueError("every source sequence needs at least two frames")
    rng = np.random.default_rng(cfg.seed)
    splits = {0: _assign_splits(cfg.n_per_class, rng), 1: _assign_splits(cfg.n_per_class, rng)}
    samples = []
    for i in range(2 * cfg.n_per_class):
        label = i % 2
        k = i // 2
        src_idx = int(rng.integers(len(sources)))
        seq = sources[src_idx]
        t = int(rng.integers(len(seq) - 1))
        frames = [seq[t], seq[t + 1]]
        spec = None
        if label:
            kind = KINDS[k % len(KINDS)]
            region = _random_region(rng, seq.shape[0], cfg.region_min, min(cfg.region_max, seq.shape[0] // 2))
            donor_seq = sources[(src_idx + 1 + int(rng.integers(len(sources) - 1))) % len(sources)]
            donor = donor_seq[int(rng.integers(len(donor_seq)))]
            f_t, f_t1, gt, spec = manipulate(kind, seq[t], seq[t + 1], donor, region, cfg, int(rng.integers(2**31)))
            frames = [f_t, f_t1]
        else:
            gt = np.zeros(seq.shape, dtype=np.uint8)
        samples.append(_finish_sample(len(samples), label, splits[label][k], frames, gt, src_idx, t, spec, cfg))
    return LabeledDataset(samples, cfg)


def _finish_sample(index, label, split, frames, gt, src_idx, t, spec, cfg: SynthConfig) -> Sample:
    f_t = normalize(np.clip(frames[0], 0.0, 1.0))
    f_t1 = normalize(np.clip(frames[1], 0.0, 1.0))
    bundle = frame_bundle(f_t, cfg.analyzer, dense_flow(f_t, f_t1, cfg.analyzer))
    recalls = {}
    if gt.any():
        g = gt.astype(bool)
        for name, m in bundle.masks().items():
            recalls[name] = float(m[g].mean())
    return Sample(index, label, split, frames[0], mask_apply(f_t, bundle.refined), gt, bundle.refined,
                  src_idx, t, spec, recalls)


def write_corpus(ds: LabeledDataset, out_dir) -> Path:
    """``corpus/{split}/{real,fake}/%06d/`` with frame, input, gt and spec files plus a manifest."""
    root = Path(out_dir)
    for s in ds.samples:
        d = root / s.split / ("fake" if s.label else "real") / f"{s.index:06d}"
        d.mkdir(parents=True, exist_ok=True)
        write_frame(d / "frame.png", np.clip(s.frame, 0.0, 1.0))
        write_frame(d / "input.png", s.input)
        write_mask(d / "gt.png", s.gt)
        (d / "spec.json").write_text(json.dumps(s.record(), indent=2, sort_keys=True) + "\n")
    (root / "manifest.json").write_text(ds.manifest_json())
    return root


@dataclass
class CorpusSplit:
    x: np.ndarray
    y: np.ndarray
    gt: list
    records: list


def load_corpus(root) -> dict:
    """Read a corpus written by :func:`write_corpus`; returns split name -> :class:`CorpusSplit`.

    Inputs come back at 8-bit precision, which is what the PNG files hold.
    """
    root = Path(root)
    manifest = root / "manifest.json"
    if not manifest.is_file():
        raise OSError(f"no manifest.json under {root}")
    out = {}
    for split in SPLITS:
        dirs = sorted(
            (d for label in ("real", "fake") for d in (root / split / label).glob("*") if d.is_dir()),
            key=lambda d: d.name,
        )
        if not dirs:
            out[split] = CorpusSplit(np.zeros((0, 1, 1, 1)), np.zeros(0), [], [])
            continue
        records = [json.loads((d / "spec.json").read_text()) for d in dirs]
        x = np.stack([read_image(d / "input.png") for d in dirs])[:, None]
        y = np.array([1.0 if r["label"] == "fake" else 0.0 for r in records])
        out[split] = CorpusSplit(x, y, [read_mask(d / "gt.png") for d in dirs], records)
    return out
