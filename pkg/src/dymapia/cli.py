"""``dymapia`` command-line entry point.

Every subcommand writes ``effective_config.json`` into ``--out`` before doing
any work.  Exit codes: 0 success, 2 invalid configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .anomaly import FIELDS, AnalyzerConfig, build_bundle, dense_flow, frame_bundle
from .evalprof import Confusion, metrics, metrics_csv, profile
from .imgcore import read_image, resize_bilinear, write_mask, write_overlay
from .net import NetConfig, TrainConfig, evaluate, predict, predict_batch, train
from .net import checkpoint
from .preprocess import SegmentationSource, load_sequence, preprocess_frame
from .synth import SynthConfig, load_corpus, make_dataset, render_source, write_corpus

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
CHECKPOINT_NAME = "model.dxcn"

log = logging.getLogger("dymapia")


class ConfigError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _coerce(cls, section: str, mapping: dict, base):
    """Overlay ``mapping`` onto dataclass instance ``base`` with type checks."""
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(mapping) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {unknown}")
    kw = {}
    for name, value in mapping.items():
        current = getattr(base, name)
        try:
            if isinstance(current, bool):
                kw[name] = bool(value)
            elif isinstance(current, int):
                if float(value) != int(value):
                    raise ValueError
                kw[name] = int(value)
            elif isinstance(current, float):
                kw[name] = float(value)
            elif isinstance(current, tuple):
                kw[name] = tuple(int(v) for v in value)
            else:
                kw[name] = value
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {name}: bad value {value!r}") from None
    try:
        return replace(base, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


@dataclass
class RunConfig:
    """Analyzer, network, training and corpus settings merged from file and flags."""

    seed: int = 0
    jobs: int = 1
    preset: str = "lite"
    input_side: int | None = None
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    SECTIONS = ("analyzer", "train", "synth")
    SCALARS = ("seed", "jobs", "preset", "input_side")

    @classmethod
    def from_mapping(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - set(cls.SECTIONS) - set(cls.SCALARS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        rc = cls()
        for key in cls.SCALARS:
            if key in doc:
                setattr(rc, key, doc[key])
        rc.analyzer = _coerce(AnalyzerConfig, "analyzer", doc.get("analyzer", {}), rc.analyzer)
        rc.train = _coerce(TrainConfig, "train", doc.get("train", {}), rc.train)
        synth = dict(doc.get("synth", {}))
        if "analyzer" in synth:
            raise ConfigError("set analyzer options in the top-level [analyzer] section")
        rc.synth = _coerce(SynthConfig, "synth", synth, rc.synth)
        return rc

    def apply_flags(self, args) -> None:
        if args.seed is not None:
            self.seed = args.seed
        if args.jobs is not None:
            self.jobs = args.jobs
        if args.preset is not None:
            self.preset = args.preset
        for name in ("epochs", "lr", "batch_size"):
            value = getattr(args, name, None)
            if value is not None:
                self.train = _coerce(TrainConfig, "train", {name: value}, self.train)
        n = getattr(args, "n_per_class", None)
        if n is not None:
            self.synth = _coerce(SynthConfig, "synth", {"n_per_class": n}, self.synth)

    def finalize(self) -> "RunConfig":
        """Validate scalars and propagate seed and analyzer settings into sub-configs."""
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {self.jobs!r}")
        if self.preset not in ("paper", "lite"):
            raise ConfigError(f"preset must be 'paper' or 'lite', got {self.preset!r}")
        if self.input_side is not None and (not isinstance(self.input_side, int) or self.input_side < 8):
            raise ConfigError("input_side must be an integer >= 8")
        try:
            self.train = replace(self.train, seed=self.seed)
            self.synth = replace(self.synth, seed=self.seed, analyzer=self.analyzer)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def net_config(self, side: int) -> NetConfig:
        try:
            return NetConfig.from_preset(self.preset, input_side=self.input_side or side)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        synth = self.synth.to_dict()
        synth.pop("analyzer")
        return {
            "seed": self.seed,
            "jobs": self.jobs,
            "preset": self.preset,
            "input_side": self.input_side,
            "analyzer": self.analyzer.to_dict(),
            "train": self.train.to_dict(),
            "synth": synth,
        }


def load_run_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    rc = RunConfig.from_mapping(doc)
    rc.apply_flags(args)
    return rc.finalize()


# ------------------------------------------------------------------ commands


def _write_effective(out: Path, command: str, rc: RunConfig, inputs: dict) -> None:
    doc = {"command": command, "version": __version__, "inputs": inputs, "config": rc.to_dict()}
    (out / "effective_config.json").write_text(_dump(doc))


def _segmentation(args) -> SegmentationSource:
    try:
        return SegmentationSource(mode=args.segmentation, path=args.seg_path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_mask(args, rc: RunConfig, out: Path) -> int:
    src = _segmentation(args)
    _write_effective(out, "mask", rc, {"input": str(args.input), "segmentation": src.mode, "seg_path": args.seg_path})
    seq = load_sequence(args.input)
    pre = [preprocess_frame(f, src, t) for t, f in enumerate(seq.frames)]
    bundles = build_bundle([p.frame for p in pre], rc.analyzer, [p.region for p in pre], jobs=rc.jobs)
    diagnostics = []
    for p, b in zip(pre, bundles):
        for name, mask in b.masks().items():
            write_mask(out / f"{name}_{b.t:06d}.png", mask)
        write_overlay(out / f"overlay_{b.t:06d}.png", p.frame, b.refined)
        diagnostics.append({
            "t": b.t,
            "face_pixels": int(p.region.sum()),
            "skippable": p.skippable,
            "pixels": {name: int(b.masks()[name].sum()) for name in FIELDS},
            "notes": list(b.notes),
        })
    failures = sum(1 for d in diagnostics if d["notes"])
    (out / "diagnostics.json").write_text(_dump({"frames": len(bundles), "frames_with_notes": failures, "per_frame": diagnostics}))
    print(f"wrote {len(bundles)} mask bundles to {out}")
    return EXIT_OK


def cmd_synth(args, rc: RunConfig, out: Path) -> int:
    _write_effective(out, "synth", rc, {})
    ds = make_dataset(cfg=rc.synth)
    write_corpus(ds, out / "corpus")
    counts = ds.counts()
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def _corpus(path):
    data = load_corpus(path)
    if len(data["train"].y) == 0 or len(data["val"].y) == 0:
        raise OSError(f"corpus {path} has an empty train or val split")
    return data


def cmd_train(args, rc: RunConfig, out: Path) -> int:
    _write_effective(out, "train", rc, {"corpus": str(args.corpus)})
    data = _corpus(args.corpus)
    net = rc.net_config(data["train"].x.shape[-1])
    tr, va = data["train"], data["val"]
    x_tr, x_va = _fit_side(tr.x, net.input_side), _fit_side(va.x, net.input_side)
    params, history = train(x_tr, tr.y, x_va, va.y, net, rc.train)
    val_loss, val_acc = evaluate(params, x_va, va.y)
    manifest = {
        "seed": rc.seed,
        "epochs": rc.train.epochs,
        "metrics": {"val_loss": val_loss, "val_acc": val_acc, "best_epoch": _best_epoch(history)},
    }
    checkpoint.save(out / CHECKPOINT_NAME, params, manifest)
    (out / "history.csv").write_text(history.to_csv())
    print(f"val_acc {val_acc:.4f} val_loss {val_loss:.6f}")
    return EXIT_OK


def _best_epoch(history) -> int:
    if not history.val_acc:
        return 0
    return history.epoch[int(np.argmax(history.val_acc))]


def _fit_side(x, side: int):
    if x.shape[-1] == side and x.shape[-2] == side:
        return x
    return np.stack([resize_bilinear(img[0], side, side) for img in x])[:, None]


def _read_predictions(path):
    """CSV with ``label,prediction`` columns holding 0/1 or real/fake."""
    def as_int(v):
        v = v.strip().lower()
        if v in ("fake", "1"):
            return 1
        if v in ("real", "0"):
            return 0
        raise ConfigError(f"{path}: bad label {v!r}")

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"label", "prediction"} <= set(rows[0]):
        raise ConfigError(f"{path}: need a header with label and prediction columns")
    return np.array([as_int(r["label"]) for r in rows]), np.array([as_int(r["prediction"]) for r in rows])


def cmd_eval(args, rc: RunConfig, out: Path) -> int:
    inputs = {"corpus": args.corpus and str(args.corpus), "checkpoint": args.checkpoint and str(args.checkpoint),
              "predictions": args.predictions and str(args.predictions), "split": args.split}
    _write_effective(out, "eval", rc, inputs)
    if args.predictions:
        y_true, y_pred = _read_predictions(args.predictions)
        model, dataset = "predictions", Path(args.predictions).stem
    else:
        if not (args.corpus and args.checkpoint):
            raise ConfigError("eval needs --corpus and --checkpoint, or --predictions")
        params = checkpoint.load(args.checkpoint)
        split = load_corpus(args.corpus)[args.split]
        if len(split.y) == 0:
            raise OSError(f"split {args.split!r} of {args.corpus} is empty")
        probs = predict_batch(params, _fit_side(split.x, params.cfg.input_side))
        y_true, y_pred = split.y.astype(int), (probs > 0.5).astype(int)
        model, dataset = f"distxcnet-{params.cfg.preset}", f"synth-{args.split}"
    m = metrics(Confusion.from_predictions(y_true, y_pred))
    row = {"model": model, "dataset": dataset, **m}
    text = metrics_csv([row])
    (out / "report.csv").write_text(text)
    (out / "report.json").write_text(_dump({"rows": [row], "n": int(len(y_true))}))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_predict(args, rc: RunConfig, out: Path) -> int:
    src = _segmentation(args)
    _write_effective(out, "predict", rc, {"frame": str(args.frame), "next": args.next and str(args.next),
                                          "checkpoint": str(args.checkpoint)})
    params = checkpoint.load(args.checkpoint)
    pre = preprocess_frame(read_image(args.frame), src)
    flow = None
    if args.next:
        nxt = preprocess_frame(read_image(args.next), src)
        if nxt.frame.shape != pre.frame.shape:
            raise ConfigError("--next frame must match the frame size")
        flow = dense_flow(pre.frame, nxt.frame, rc.analyzer)
    bundle = frame_bundle(pre.frame, rc.analyzer, flow, pre.region)
    result = predict(pre.frame, bundle.refined, params)
    write_mask(out / "refined.png", bundle.refined)
    (out / "prediction.json").write_text(_dump({**result, "notes": list(bundle.notes)}))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def desk_sequence(seed: int, n_frames: int = 32, side: int = 256):
    return render_source(seed, side=side, n_frames=n_frames)


def cmd_profile(args, rc: RunConfig, out: Path) -> int:
    _write_effective(out, "profile", rc, {"input": args.input and str(args.input), "frames": args.frames, "side": args.side})
    if args.input:
        seq = load_sequence(args.input)
    else:
        seq = desk_sequence(rc.seed, args.frames, args.side)
    result = profile(seq, rc.analyzer)
    (out / "profile.csv").write_text(result.to_csv())
    (out / "profile.json").write_text(result.to_json() + "\n")
    s = result.summary
    print(f"fused {s['fused_ms']:.1f} ms, independent {s['independent_ms']:.1f} ms, ratio {s['ratio']:.3f}")
    return EXIT_OK


COMMANDS = {
    "mask": cmd_mask,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "profile": cmd_profile,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", required=True, help="output directory (created if missing)")
    common.add_argument("--jobs", type=int, help="worker threads for per-frame work (default 1)")
    common.add_argument("--preset", choices=("paper", "lite"))

    parser = argparse.ArgumentParser(prog="dymapia", description="Dynamic anomaly masks and mask-guided classification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", parents=[common], help="compute mask bundles for a frame directory")
    p.add_argument("input", type=Path)
    p.add_argument("--segmentation", default="heuristic-ellipse", choices=SegmentationSource.MODES)
    p.add_argument("--seg-path")

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic labelled corpus")
    p.add_argument("--n-per-class", type=int)

    p = sub.add_parser("train", parents=[common], help="train the classifier on a corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint or a predictions file")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--predictions", type=Path)

    p = sub.add_parser("predict", parents=[common], help="classify one frame")
    p.add_argument("frame", type=Path)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--next", type=Path, help="following frame, enables temporal evidence")
    p.add_argument("--segmentation", default="heuristic-ellipse", choices=SegmentationSource.MODES)
    p.add_argument("--seg-path")

    p = sub.add_parser("profile", parents=[common], help="time fused against independent analyzers")
    p.add_argument("input", type=Path, nargs="?")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--side", type=int, default=256)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("DYMAPIA_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG", "WARNING"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = load_run_config(args)
    except ConfigError as exc:
        print(f"dymapia: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"dymapia: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, rc, out)
    except ConfigError as exc:
        print(f"dymapia: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"dymapia: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"dymapia: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
