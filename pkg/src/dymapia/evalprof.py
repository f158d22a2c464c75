"""Classification metrics, baseline comparison, localization scores and stage profiling."""

from __future__ import annotations

import csv
import io
import json
import time
import tracemalloc
from dataclasses import asdict, dataclass, field
from decimal import Decimal

import numpy as np

from .anomaly import AnalyzerConfig, MODALITIES, dense_flow
from .anomaly.bundle import assemble
from .anomaly.edges import edge_mask
from .anomaly.motion import temporal_mask
from .anomaly.spectral import freq_mask
from .anomaly.texture import texture_mask
from .imgcore import as_mask
from .preprocess import CANONICAL_LEFT_EYE, CANONICAL_RIGHT_EYE, Landmarks, SegmentationSource, preprocess_frame


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "Confusion":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p)))


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def metrics(c: Confusion) -> dict:
    """Precision, recall, F1 and accuracy; any 0/0 is reported as 0 and listed in ``degenerate``."""
    flags = []
    p = _ratio(c.tp, c.tp + c.fp, "precision", flags)
    r = _ratio(c.tp, c.tp + c.fn, "recall", flags)
    f1 = _ratio(2 * p * r, p + r, "f1", flags)
    acc = _ratio(c.tp + c.tn, c.total, "accuracy", flags)
    return {"precision": p, "recall": r, "f1": f1, "accuracy": acc, "degenerate": flags}


# Reference F1 (%) per benchmark: our score and the baseline it is compared against.
PUBLISHED_F1 = {
    "FF++": {"ours": "99.95", "baseline": ("Face X-ray", "99.79")},
    "CBDF": {"ours": "99.96", "baseline": ("Capsule", "98.86")},
    "VDFD": {"ours": "99.76", "baseline": ("F3Net", "99.64")},
}


def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


def compare_report(ours: dict, baselines: dict, baseline_name: dict | None = None) -> list:
    """Delta-F1 of our model against the best (or an explicitly named) baseline per dataset.

    ``ours`` maps dataset -> F1; ``baselines`` maps dataset -> {model: F1}.
    Arithmetic is decimal so published two-digit values subtract exactly.
    """
    rows = []
    for dataset, our_f1 in ours.items():
        pool = baselines.get(dataset) or {}
        if not pool:
            raise ValueError(f"no baselines for dataset {dataset!r}")
        if baseline_name and dataset in baseline_name:
            name = baseline_name[dataset]
        else:
            name = max(pool, key=lambda m: (_dec(pool[m]), m))
        delta = _dec(our_f1) - _dec(pool[name])
        rows.append({
            "dataset": dataset,
            "ours_f1": float(_dec(our_f1)),
            "baseline": name,
            "baseline_f1": float(_dec(pool[name])),
            "delta_f1": float(delta),
        })
    return rows


def localization(pred, gt) -> dict:
    pred = as_mask(pred).astype(bool)
    gt = as_mask(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    flags = []
    inter = int(np.sum(pred & gt))
    union = int(np.sum(pred | gt))
    if not gt.any():
        flags.append("recall")
        recall = 1.0
    else:
        recall = inter / int(gt.sum())
    precision = _ratio(inter, int(pred.sum()), "precision", flags)
    iou = _ratio(inter, union, "iou", flags)
    return {"pixel_recall": recall, "pixel_precision": precision, "iou": iou, "degenerate": flags}


def metrics_csv(rows: list) -> str:
    """Rows of {model, dataset, precision, recall, f1, accuracy} as a CSV with percentages."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "dataset", "PRE", "REC", "F1", "ACC"])
    for r in rows:
        w.writerow([r["model"], r["dataset"]] + [f"{100 * r[k]:.2f}" for k in ("precision", "recall", "f1", "accuracy")])
    return buf.getvalue()


# ---------------------------------------------------------------- profiling


@dataclass
class StageTiming:
    stage: str
    ms: float
    peak_bytes: int = 0


@dataclass
class ProfileResult:
    fused: list
    independent: list
    frames: int
    mode: str = "single-threaded"
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "stage", "ms", "bytes"])
        for mode, rows in (("fused", self.fused), ("independent", self.independent)):
            for r in rows:
                w.writerow([mode, r.stage, f"{r.ms:.3f}", r.peak_bytes])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "frames": self.frames,
            "mode": self.mode,
            "fused": [asdict(r) for r in self.fused],
            "independent": [asdict(r) for r in self.independent],
            "summary": self.summary,
        }, indent=2)


class _Timer:
    """Accumulates wall time and peak traced allocation per stage."""

    def __init__(self, stages, track_memory: bool):
        self.ms = {s: 0.0 for s in stages}
        self.peak = {s: 0 for s in stages}
        self.track = track_memory

    def run(self, stage, fn, *args):
        if self.track:
            tracemalloc.reset_peak()
            base = tracemalloc.get_traced_memory()[0]
        t0 = time.perf_counter()
        out = fn(*args)
        self.ms[stage] += (time.perf_counter() - t0) * 1000.0
        if self.track:
            self.peak[stage] = max(self.peak[stage], tracemalloc.get_traced_memory()[1] - base)
        return out

    def rows(self):
        return [StageTiming(s, self.ms[s], self.peak[s]) for s in self.ms]


def canonical_landmarks(shape) -> Landmarks:
    h, w = shape
    return Landmarks((CANONICAL_LEFT_EYE[0] * w, CANONICAL_LEFT_EYE[1] * h), (CANONICAL_RIGHT_EYE[0] * w, CANONICAL_RIGHT_EYE[1] * h))


_ANALYZERS = {
    "freq": lambda pre, cfg: freq_mask(pre.frame, cfg, pre.region),
    "tex": lambda pre, cfg: texture_mask(pre.frame, cfg, pre.region),
    "edge": lambda pre, cfg: edge_mask(pre.frame, cfg, pre.region),
}


def stage_names(analyzers=MODALITIES, classify: bool = False) -> list:
    names = ["preprocess"] + [a for a in MODALITIES if a in analyzers] + ["fusion"]
    return names + ["classify"] if classify else names


def run_pipeline(frames, cfg: AnalyzerConfig, timer: _Timer | None = None, shared: bool = True,
                 analyzers=MODALITIES, classifier=None, src: SegmentationSource | None = None):
    """Mask pipeline over ``frames``; returns refined masks and classifier outputs.

    With ``shared`` every frame is preprocessed once and reused by all
    analyzers (and each flow pair is solved once); otherwise every consumer
    preprocesses its own input, as stand-alone tools would.
    """
    timer = timer or _Timer(stage_names(analyzers, classifier is not None), False)
    src = src or SegmentationSource()
    lm = canonical_landmarks(frames[0].shape)
    size = frames[0].shape[0]
    n = len(frames)
    cache, flows = {}, {}

    def prepared(t):
        if t in cache:
            return cache[t]
        pre = timer.run("preprocess", preprocess_frame, frames[t], src, t, lm, size)
        if shared:
            cache[t] = pre
        return pre

    refined, outputs = [], []
    for t in range(n):
        masks = {}
        for name in ("freq", "tex", "edge"):
            if name in analyzers:
                pre = prepared(t)
                masks[name] = timer.run(name, _ANALYZERS[name], pre, cfg)
        if "temp" in analyzers and n >= 2:
            a = t if t + 1 < n else t - 1
            pa, pb = prepared(a), prepared(a + 1)
            region = (pa if a == t else pb).region
            if a not in flows:
                flow = timer.run("temp", dense_flow, pa.frame, pb.frame, cfg)
                if shared:
                    flows[a] = flow
            else:
                flow = flows[a]
            masks["temp"] = timer.run("temp", temporal_mask, flow, cfg, region)
        zero = np.zeros(frames[0].shape, dtype=np.uint8)
        parts = [masks.get(m, zero) for m in MODALITIES]
        bundle = timer.run("fusion", assemble, t, *parts, cfg)
        refined.append(bundle.refined)
        if classifier is not None:
            pre = prepared(t)
            outputs.append(timer.run("classify", classifier, pre.frame, bundle.refined))
    return refined, outputs


def profile(frames, cfg: AnalyzerConfig = AnalyzerConfig(), analyzers=MODALITIES, classifier=None,
            track_memory: bool = True) -> ProfileResult:
    """Time the fused (shared preprocessing) and independent pipelines stage by stage.

    Wall times come from untraced runs.  With ``track_memory`` a second,
    untimed pass per mode runs under tracemalloc to fill in peak bytes, so
    allocation tracing never inflates the reported times.
    """
    frames = list(frames.frames) if hasattr(frames, "frames") else list(frames)
    names = stage_names(analyzers, classifier is not None)
    results = {}
    for mode, shared in (("fused", True), ("independent", False)):
        timer = _Timer(names, False)
        run_pipeline(frames, cfg, timer, shared, analyzers, classifier)
        rows = timer.rows()
        if track_memory:
            peaks = _memory_pass(frames, cfg, names, shared, analyzers, classifier)
            rows = [StageTiming(r.stage, r.ms, peaks[r.stage]) for r in rows]
        results[mode] = rows
    fused = sum(r.ms for r in results["fused"])
    indep = sum(r.ms for r in results["independent"])
    summary = {
        "fused_ms": fused,
        "independent_ms": indep,
        "ratio": fused / indep if indep > 0 else float("nan"),
        "latency_reduction": 1.0 - fused / indep if indep > 0 else float("nan"),
    }
    return ProfileResult(results["fused"], results["independent"], len(frames), summary=summary)


def _memory_pass(frames, cfg, names, shared, analyzers, classifier) -> dict:
    started = not tracemalloc.is_tracing()
    if started:
        tracemalloc.start()
    try:
        timer = _Timer(names, True)
        run_pipeline(frames, cfg, timer, shared, analyzers, classifier)
    finally:
        if started:
            tracemalloc.stop()
    return timer.peak
