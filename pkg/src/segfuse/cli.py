"""Command-line entry point: data generation, training, evaluation,
inference, gate export, and ablations.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure.  Machine
output is JSON on stdout; per-row exports are CSV.  Config files are flat
JSON whose keys mirror the model and training config field names exactly;
unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.special import expit

from .checkpoint import load_checkpoint, save_checkpoint
from .formats import read_manifest, read_segemb, write_manifest, write_segemb, load_split
from .model import FUSION_MODES, FstConfig, forward, tiny_preset
from .segmentation import fixed_window_spans, four_bar_spans, load_downbeats, pad_or_crop, pool_bars
from .ssm import SegmentEmbeddingSequence
from .synthgen import SynthSpec, gen_dataset
from .tensor import NonFiniteError
from .training import TrainConfig, evaluate, train

SEGMENTATIONS = ("fourbar", "fixed")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2))


def _resolve_configs(args, d_in_hint: int | None = None):
    """Build (FstConfig, TrainConfig) from the config file plus flag overrides.

    Each config-file key must name a field of exactly one of the two configs;
    anything else is a typo and rejected.  Without a file, the tiny preset is
    used with d_in taken from the dataset.
    """
    fst_names = {f.name for f in dataclasses.fields(FstConfig)}
    tc_names = {f.name for f in dataclasses.fields(TrainConfig)} - {"fusion_mode"}
    fst_kw, tc_kw = {}, {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        obj = json.loads(Path(config_path).read_text())
        if not isinstance(obj, dict):
            raise ValueError(f"{config_path}: config must be a JSON object")
        for key, value in obj.items():
            if key in fst_names:
                fst_kw[key] = value
            elif key in tc_names:
                tc_kw[key] = value
            else:
                raise ValueError(f"unknown config key: {key!r}")
        try:
            fst = FstConfig(**fst_kw)
        except TypeError as exc:
            raise ValueError(f"{config_path}: {exc}") from exc
    else:
        base = tiny_preset().to_dict()
        if d_in_hint is not None:
            base["d_in"] = d_in_hint
        fst = FstConfig(**base)
    for flag in ("epochs", "lr", "wd", "batch_size", "patience", "seed"):
        value = getattr(args, flag, None)
        if value is not None:
            tc_kw[flag] = value
    return fst, TrainConfig(**tc_kw)


def _dataset_dim(manifest_path) -> int:
    entries = read_manifest(manifest_path)
    if not entries:
        raise ValueError(f"{manifest_path}: empty manifest")
    return read_segemb(Path(manifest_path).parent / entries[0].path).shape[1]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--wd", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_data(args) -> int:
    spec = SynthSpec(n_tracks=args.tracks, d=args.dim, seg_min=args.seg_min,
                     seg_max=args.seg_max, noise_sigma=args.noise_sigma,
                     drift_sigma=args.drift_sigma, seed=args.seed)
    manifest = gen_dataset(spec, args.out, bar_level=args.bar_level,
                           bars_per_segment=args.bars_per_segment,
                           bar_duration=args.bar_duration)
    counts = {"train": 0, "val": 0, "test": 0}
    for e in read_manifest(manifest):
        counts[e.split] += 1
    _print_json({"manifest": str(manifest), "tracks_per_class": args.tracks,
                 "dim": args.dim, "splits": counts})
    return 0


def cmd_train(args) -> int:
    fst, tc = _resolve_configs(args)
    params, history = train(args.data, fst, tc)
    out = Path(args.out)
    save_checkpoint(out, params)
    csv_path = Path(args.history_csv) if args.history_csv else out.with_suffix(".history.csv")
    json_path = Path(args.history_json) if args.history_json else out.with_suffix(".history.json")
    history.write_csv(csv_path)
    json_path.write_text(json.dumps(history.to_dict(), indent=2) + "\n")
    _print_json({"checkpoint": str(out), "history_csv": str(csv_path),
                 "history_json": str(json_path), "epochs_run": history.n_epochs,
                 "best_epoch": history.best_epoch, "stop_reason": history.stop_reason,
                 "best_val_loss": history.val_loss[history.best_epoch]})
    return 0


def cmd_eval(args) -> int:
    params = load_checkpoint(args.ckpt)
    seqs = load_split(args.data, args.split)
    if not seqs:
        raise ValueError(f"split {args.split!r} is empty")
    _print_json(evaluate(params, seqs).to_dict())
    return 0


def cmd_infer(args) -> int:
    if args.from_raw and not args.downbeats:
        raise ValueError("--from-raw requires --downbeats")
    params = load_checkpoint(args.ckpt)
    emb = read_segemb(args.input)
    track_id = Path(args.input).stem
    if args.downbeats:
        ann = load_downbeats(args.downbeats, track_id=track_id)
        spans = four_bar_spans(ann)
        if not spans:
            raise ValueError(f"{args.downbeats}: too few downbeats for one segment")
        emb = pool_bars(emb, ann.downbeats, spans)
    seq = SegmentEmbeddingSequence(track_id=track_id, embeddings=emb)
    fixed, _ = pad_or_crop(seq, target=params.config.max_segments, mode="eval")
    logit, _ = forward(fixed, params)
    prob = float(expit(logit.data))
    _print_json({"track_id": track_id, "prob_fake": prob,
                 "label": int(prob >= 0.5), "n_segments_valid": fixed.n_valid})
    return 0


def cmd_export_gates(args) -> int:
    params = load_checkpoint(args.ckpt)
    if params.config.fusion_mode != "gated":
        raise ValueError("no gate in this fusion mode")
    seqs = load_split(args.data, args.split)
    if not seqs:
        raise ValueError(f"split {args.split!r} is empty")
    seqs.sort(key=lambda s: s.track_id)

    lines = ["track_id,label,segment_index,mean_gate"]
    by_class = {0: [], 1: []}
    for seq in seqs:
        fixed, _ = pad_or_crop(seq, target=params.config.max_segments, mode="eval")
        _, trace = forward(fixed, params)
        for k in range(fixed.n_valid):
            g = float(trace.mean_gate[k])
            lines.append(f"{seq.track_id},{seq.label},{k},{g!r}")
            by_class[seq.label].append(g)
    Path(args.out).write_text("\n".join(lines) + "\n")

    mean_real = float(np.mean(by_class[0])) if by_class[0] else None
    mean_fake = float(np.mean(by_class[1])) if by_class[1] else None
    direction = None
    if mean_real is not None and mean_fake is not None:
        direction = "fake_gate_lower" if mean_fake < mean_real else "fake_gate_higher"
    _print_json({"csv": str(args.out), "n_rows": len(lines) - 1,
                 "mean_gate_real": mean_real, "mean_gate_fake": mean_fake,
                 "direction": direction})
    return 0


def _derive_dataset(manifest_path, strategy: str, window: float, hop: float,
                    out_dir: Path):
    """Re-segment a bar-level dataset under one strategy; returns its manifest."""
    src_dir = Path(manifest_path).parent
    entries = read_manifest(manifest_path)
    for e in entries:
        bars = read_segemb(src_dir / e.path)
        db_path = src_dir / f"{e.track_id}.downbeats"
        if not db_path.is_file():
            raise ValueError(f"segmentation ablation needs downbeat files; missing {db_path}")
        ann = load_downbeats(db_path, track_id=e.track_id)
        if strategy == "fourbar":
            spans = four_bar_spans(ann)
        else:
            spans = fixed_window_spans(ann.track_duration, window, hop)
        if not spans:
            raise ValueError(f"track {e.track_id}: {strategy} produced no spans")
        write_segemb(out_dir / e.path, pool_bars(bars, ann.downbeats, spans))
    derived = out_dir / "manifest.jsonl"
    write_manifest(derived, entries)  # same ids/labels/splits, new files
    return derived


def cmd_ablate(args) -> int:
    if not args.modes and not args.segmentation:
        raise ValueError("nothing to ablate: pass --modes and/or --segmentation")
    fst, tc = _resolve_configs(args, d_in_hint=_dataset_dim(args.data))
    result = {}

    if args.modes:
        rows = []
        for mode in args.modes.split(","):
            mode = mode.strip()
            if mode not in FUSION_MODES:
                raise ValueError(f"unknown fusion mode {mode!r}")
            params, _ = train(args.data, fst, dataclasses.replace(tc, fusion_mode=mode))
            report = evaluate(params, load_split(args.data, "test"))
            rows.append({"mode": mode, "metrics": report.to_dict()})
        result["fusion"] = rows

    if args.segmentation:
        rows = []
        for strategy in args.segmentation.split(","):
            strategy = strategy.strip()
            if strategy not in SEGMENTATIONS:
                raise ValueError(f"unknown segmentation strategy {strategy!r}")
            with tempfile.TemporaryDirectory() as tmp:
                derived = _derive_dataset(args.data, strategy, args.window,
                                          args.hop, Path(tmp))
                params, _ = train(derived, fst, tc)
                report = evaluate(params, load_split(derived, "test"))
            rows.append({"segmentation": strategy, "metrics": report.to_dict()})
        result["segmentation"] = rows

    text = json.dumps(result, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segfuse",
                                     description="Fusion segment transformer toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--tracks", type=int, default=300, help="tracks per class")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seg-min", dest="seg_min", type=int, default=20)
    p.add_argument("--seg-max", dest="seg_max", type=int, default=70)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.1)
    p.add_argument("--drift-sigma", dest="drift_sigma", type=float, default=0.3)
    p.add_argument("--bar-level", dest="bar_level", action="store_true",
                   help="emit bar-granularity embeddings plus downbeat files")
    p.add_argument("--bars-per-segment", dest="bars_per_segment", type=int, default=4)
    p.add_argument("--bar-duration", dest="bar_duration", type=float, default=2.0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True, type=Path, help="manifest path")
    p.add_argument("--config", required=True, type=Path, help="flat JSON config")
    p.add_argument("--out", required=True, type=Path, help="checkpoint path")
    p.add_argument("--history-csv", dest="history_csv", type=Path, default=None)
    p.add_argument("--history-json", dest="history_json", type=Path, default=None)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--ckpt", required=True, type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="classify a single track")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path, help="embedding file")
    p.add_argument("--downbeats", type=Path, default=None,
                   help="treat input as bar-level; group via these downbeats")
    p.add_argument("--from-raw", dest="from_raw", action="store_true",
                   help="explicit flag for bar-level input (requires --downbeats)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("export-gates", help="dump per-segment gate means to CSV")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_export_gates)

    p = sub.add_parser("ablate", help="fusion-mode and segmentation ablations")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--config", type=Path, default=None,
                   help="flat JSON config (default: tiny preset, d_in from data)")
    p.add_argument("--modes", default=None, help="comma list of fusion modes")
    p.add_argument("--segmentation", default=None,
                   help="comma list of strategies (fourbar, fixed)")
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--hop", type=float, default=2.5)
    p.add_argument("--out", type=Path, default=None, help="also write the table here")
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
