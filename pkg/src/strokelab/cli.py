"""Command-line entry point: one binary, flat verbs, deterministic file I/O.

Subcommands mirror the pipeline order: synth -> segment -> prepare ->
train -> classify / eval-model, plus eval-tracker and report. All
randomness flows from --seed; outputs are written atomically and reruns
with identical flags are byte-identical. Exit codes: 0 success, 1 domain
error, 2 usage/format error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import nn
from .errors import DomainError, FormatError, StrokeLabError
from .knn import classify_sample, knn_from_dict, knn_to_dict, train_knn
from .pipeline import (StrokeLabel, prepare_sample, read_dataset, repad,
                       samples_to_arrays, split_dataset, write_dataset)
from .segmenter import SegmenterConfig, StrokeOutcome, annotate_strokes, strokes_to_dict
from .synth import annotation_to_dict, build_rally, parse_rally_spec
from .tracker_eval import (DEFAULT_THRESHOLD_PX, accumulate_outcomes, metrics_report,
                           pairs_from_trajectories)
from .trajectory import (drop_missing, format_trajectory_csv, load_trajectory_file,
                         save_trajectory_file)

PAD_FOOTER = ("Reference note: in the original benchmark experiments, models "
              "trained on pre-padded inputs generalized better than models "
              "trained on post-padded inputs.")


def _write_atomic(path, data: bytes) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_json(path, doc: dict) -> None:
    _write_atomic(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _read_json(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return json.loads(fh.read().decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None


def _read_config_file(path) -> dict[str, str]:
    config = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path} line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            config[key.strip().replace("-", "_")] = value.strip()
    return config


class Settings:
    """Flag > config file > default resolution, with an echo of what was used."""

    def __init__(self, args: argparse.Namespace):
        self.config = _read_config_file(args.config) if getattr(args, "config", None) else {}
        self.args = args
        self.effective: dict = {}

    def get(self, key: str, default, cast=None, flag: str | None = None):
        flag = key if flag is None else flag
        value = getattr(self.args, flag, None)
        if value is None and key in self.config:
            try:
                value = (cast or str)(self.config[key])
            except ValueError:
                raise FormatError(f"config key {key}: cannot parse "
                                  f"{self.config[key]!r}") from None
        if value is None:
            value = default
        self.effective[key] = value
        return value


def _segmenter_config(settings: Settings) -> SegmenterConfig:
    return SegmenterConfig(
        boundary_window=settings.get("boundary_window", 0.08333, float),
        pitch_window=settings.get("pitch_window", 0.04167, float),
        boundary_margin=settings.get("boundary_margin", 0.05, float),
        net_x=settings.get("net_x", None, float),
        min_x_travel=settings.get("min_x_travel", 200.0, float),
        min_stroke_duration=settings.get("min_stroke_duration", 0.0833, float),
    )


def _load_traj(settings: Settings, path):
    fps = settings.get("fps", 120.0, float)
    width = settings.get("frame_width", 1920, int)
    height = settings.get("frame_height", 1080, int)
    return load_trajectory_file(path, fps=fps, frame_size=(width, height))


def _cmd_synth(args) -> int:
    settings = Settings(args)
    kinds = parse_rally_spec(args.rally)
    seed = settings.get("seed", 0, int)
    traj, annotation = build_rally(kinds, rng_seed=seed)
    save_trajectory_file(traj, args.out)
    if args.ann:
        doc = annotation_to_dict(annotation)
        doc["config"] = {"rally": args.rally, "seed": seed}
        _write_json(args.ann, doc)
    print(f"synth: {len(kinds)} stroke(s), {len(traj)} frames -> {args.out}")
    return 0


def _cmd_segment(args) -> int:
    settings = Settings(args)
    cfg = _segmenter_config(settings)
    traj = drop_missing(_load_traj(settings, args.input))
    segments = annotate_strokes(traj, cfg)
    doc = strokes_to_dict(segments, traj.fps)
    doc["config"] = settings.effective
    _write_json(args.out, doc)
    counts = {}
    for s in segments:
        counts[s.outcome.value] = counts.get(s.outcome.value, 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items())) or "none"
    print(f"segment: {len(segments)} stroke(s) ({summary}) -> {args.out}")
    return 0


def _match_label(segment, ann_strokes) -> str | None:
    mid = (segment.start.frame_index + segment.end.frame_index) / 2.0
    for stroke in ann_strokes:
        if stroke["start_frame"] <= mid <= stroke["end_frame"]:
            return stroke.get("label")
    return None


def _cmd_prepare(args) -> int:
    settings = Settings(args)
    cfg = _segmenter_config(settings)
    pad_mode = settings.get("pad", "pre", str)
    traj = drop_missing(_load_traj(settings, args.input))
    ann = _read_json(args.ann)
    if "strokes" not in ann:
        raise FormatError(f"{args.ann}: annotation lacks a strokes list")
    segments = annotate_strokes(traj, cfg)
    stem = Path(args.input).stem
    samples = []
    skipped = 0
    for seg in segments:
        if seg.outcome != StrokeOutcome.VALID:
            continue
        label_name = _match_label(seg, ann["strokes"])
        if label_name is None:
            skipped += 1
            continue
        try:
            label = StrokeLabel(label_name)
        except ValueError:
            raise FormatError(f"{args.ann}: unknown stroke label {label_name!r}") from None
        source_id = f"{stem}:{seg.start.frame_index}-{seg.end.frame_index}"
        samples.append(prepare_sample(traj, seg, pad_mode, label=label,
                                      source_id=source_id))
    if not samples:
        raise DomainError("no labeled valid strokes found; nothing to prepare")
    buf = io.StringIO()
    write_dataset(samples, buf)
    _write_atomic(args.out, buf.getvalue().encode("utf-8"))
    print(f"prepare: {len(samples)} sample(s), {skipped} unmatched -> {args.out}")
    return 0


def _train_one(arch_name: str, train_samples, val_samples, settings: Settings,
               seed: int):
    """Train one architecture on one pad mode; returns (model_doc, row)."""
    if arch_name == "knn":
        k = settings.get("k", 9, int)
        model = train_knn(train_samples, k=k)
        train_acc = nn.evaluate_model(lambda s: classify_sample(model, s),
                                      train_samples).accuracy
        val_acc = nn.evaluate_model(lambda s: classify_sample(model, s),
                                    val_samples).accuracy
        return knn_to_dict(model), train_acc, val_acc
    width = settings.get("frame_width", 1920, int)
    height = settings.get("frame_height", 1080, int)
    scaling = (1.0 / width, 1.0 / height)
    arch = (nn.default_tcn_architecture() if arch_name == "tcn"
            else nn.default_fcnn_architecture())
    cfg = nn.TrainConfig(
        learning_rate=settings.get("lr", 0.25, float),
        epochs=settings.get("epochs", 40, int),
        batch_size=settings.get("batch", 32, int),
        seed=seed,
    )
    split_train = samples_to_arrays(train_samples)
    split_val = samples_to_arrays(val_samples)
    model, log = nn.nn_train(arch, split_train, split_val, cfg, kind=arch_name,
                             input_scaling=scaling)
    train_acc = float(np.mean(nn.predict_batch(model, split_train[0]) == split_train[1]))
    val_acc = float(np.mean(nn.predict_batch(model, split_val[0]) == split_val[1]))
    return nn.model_to_dict(model), train_acc, val_acc


def _cmd_train(args) -> int:
    settings = Settings(args)
    seed = settings.get("seed", 0, int)
    save_pad = settings.get("pad", "pre", str)
    arch_name = args.arch
    with open(args.input, "r", encoding="utf-8") as fh:
        samples = read_dataset(fh)
    split = split_dataset(samples, seed)
    rows = []
    saved_doc = None
    for mode in ("pre", "post"):
        tr = [repad(s, mode) for s in split.train]
        va = [repad(s, mode) for s in split.validation]
        model_doc, train_acc, val_acc = _train_one(arch_name, tr, va, settings, seed)
        rows.append({
            "arch": arch_name,
            "pad_mode": mode,
            "train_accuracy": train_acc,
            "validation_accuracy": val_acc,
            "train_samples": len(tr),
            "validation_samples": len(va),
        })
        if mode == save_pad:
            saved_doc = model_doc
    if args.model:
        _write_json(args.model, saved_doc)
    report = {
        "rows": rows,
        "footer": PAD_FOOTER,
        "saved_pad_mode": save_pad,
        "config": settings.effective,
    }
    _write_json(args.out, report)
    accs = ", ".join(f"{r['pad_mode']}: val={r['validation_accuracy']:.3f}" for r in rows)
    print(f"train[{arch_name}]: {accs} -> {args.out}")
    return 0


def _predict_samples(path, samples):
    doc = _read_json(path)
    kind = doc.get("kind")
    labels = list(StrokeLabel)
    if kind == "knn":
        model = knn_from_dict(doc)
        return [classify_sample(model, s) for s in samples], kind
    model = nn.model_from_dict(doc)
    x = np.stack([s.sequence for s in samples])
    preds = nn.predict_batch(model, x)
    return [labels[int(i)] for i in preds], kind


def _cmd_classify(args) -> int:
    settings = Settings(args)
    with open(args.input, "r", encoding="utf-8") as fh:
        samples = read_dataset(fh)
    preds, kind = _predict_samples(args.model, samples)
    doc = {
        "model_kind": kind,
        "predictions": [
            {"source_id": s.source_id, "label": p.value}
            for s, p in zip(samples, preds)
        ],
        "config": settings.effective,
    }
    _write_json(args.out, doc)
    print(f"classify[{kind}]: {len(samples)} sample(s) -> {args.out}")
    return 0


def _cmd_eval_model(args) -> int:
    settings = Settings(args)
    with open(args.input, "r", encoding="utf-8") as fh:
        samples = read_dataset(fh)
    for s in samples:
        if s.label is None:
            raise DomainError(f"sample {s.source_id!r} is unlabeled; cannot evaluate")
    preds, kind = _predict_samples(args.model, samples)
    labels = list(StrokeLabel)
    report = nn.evaluate_predictions(
        [labels.index(s.label) for s in samples],
        [labels.index(p) for p in preds],
    )
    doc = {
        "model_kind": kind,
        "labels": [lb.value for lb in labels],
        "confusion": report.confusion.tolist(),
        "accuracy": report.accuracy,
        "samples": len(samples),
        "config": settings.effective,
    }
    _write_json(args.out, doc)
    print(f"eval-model[{kind}]: accuracy {report.accuracy:.4f} "
          f"on {len(samples)} sample(s) -> {args.out}")
    return 0


def _cmd_eval_tracker(args) -> int:
    settings = Settings(args)
    threshold = settings.get("threshold", DEFAULT_THRESHOLD_PX, float)
    convention = settings.get("mislocalized", "literal", str)
    gt = _load_traj(settings, args.gt)
    pred = _load_traj(settings, args.pred)
    pairs = pairs_from_trajectories(gt, pred)
    counts = accumulate_outcomes(pairs, threshold, convention)
    doc = metrics_report(counts, threshold, convention)
    doc["config"] = settings.effective
    if args.out:
        _write_json(args.out, doc)
    d = doc["display"]
    print(f"eval-tracker: precision {d['precision']:.4f}, accuracy "
          f"{d['accuracy_percent']:.2f}%, F1 {d['f1']:.4f}"
          + (f" -> {args.out}" if args.out else ""))
    return 0


def _cmd_report(args) -> int:
    merged = {"reports": {}}
    for path in args.inputs:
        merged["reports"][str(path)] = _read_json(path)
    _write_json(args.out, merged)
    print(f"report: merged {len(args.inputs)} file(s) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokelab",
        description="Table-tennis ball trajectory analytics toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic rally")
    p.add_argument("--rally", required=True,
                   help='stroke plan, e.g. "serve,valid*5,missed_out"')
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trajectory CSV output")
    p.add_argument("--ann", default=None, help="ground-truth annotation JSON output")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("segment", help="segment a trajectory into strokes")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--net-x", dest="net_x", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("prepare", help="build a labeled dataset from a trajectory")
    p.add_argument("--input", required=True)
    p.add_argument("--ann", required=True, help="annotation JSON with stroke labels")
    p.add_argument("--pad", choices=("pre", "post"), default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--net-x", dest="net_x", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train a classifier (both pad modes)")
    p.add_argument("--input", required=True, help="dataset JSONL")
    p.add_argument("--arch", choices=("tcn", "fcnn", "knn"), required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pad", choices=("pre", "post"), default=None,
                   help="pad mode of the saved model (default pre)")
    p.add_argument("--model", default=None, help="model JSON output path")
    p.add_argument("--out", required=True, help="padding-comparison report JSON")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="classify prepared samples")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval-model", help="confusion-matrix report on labeled samples")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_eval_model)

    p = sub.add_parser("eval-tracker", help="evaluate tracker output against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--mislocalized", choices=("literal", "fp-only"), default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_eval_tracker)

    p = sub.add_parser("report", help="merge metric reports into one JSON")
    p.add_argument("inputs", nargs="+", help="report JSON files to merge")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: input path does not exist: {exc.filename}", file=sys.stderr)
        return 2
    except StrokeLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
