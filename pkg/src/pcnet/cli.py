"""Command-line entry point.

Five subcommands cover the pipeline: `synth` writes a labeled synthetic
dataset, `preprocess` resamples and normalizes it, `train` fits a model and
writes a checkpoint plus history, `eval` prints the metrics report, and
`predict` classifies a single cloud file.  Every command is deterministic
given its config and seed.  Failures exit nonzero with a single
`error: ...` line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import dataset as ds
from .config import RunConfig, load_config
from .geom import canonical_order, normalize_unit_sphere, resample_to_fixed_size
from .learn import (MODEL_KINDS, TrainingDiverged, evaluate, forward_logits,
                    softmax_probs, train)
from .metrics import report_text
from .seeding import fork_seed


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run config file (flat key = value)")
    common.add_argument("--seed", type=int, help="root seed override")
    common.add_argument("--model", choices=MODEL_KINDS, help="model kind override")
    common.add_argument("--points", type=int, help="target points per cloud override")
    common.add_argument("--out", help="output path (meaning depends on the command)")

    p = _Parser(prog="pcnet", description="point cloud object classification pipeline")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common],
                   help="generate a synthetic labeled dataset (--out: directory)")
    pre = sub.add_parser("preprocess", parents=[common],
                         help="resample + normalize a dataset (--out: directory)")
    pre.add_argument("manifest", help="input dataset manifest")
    tr = sub.add_parser("train", parents=[common],
                        help="train a model (--out: checkpoint path)")
    tr.add_argument("manifest", help="processed dataset manifest")
    ev = sub.add_parser("eval", parents=[common],
                        help="evaluate a checkpoint (--out: report path)")
    ev.add_argument("checkpoint", help="checkpoint path")
    ev.add_argument("manifest", help="labeled dataset manifest")
    pr = sub.add_parser("predict", parents=[common],
                        help="classify one cloud file")
    pr.add_argument("checkpoint", help="checkpoint path")
    pr.add_argument("cloud", help="point cloud file")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.model is not None:
        cfg.model = args.model
    if args.points is not None:
        cfg.points = args.points
    cfg.validate()
    return cfg


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return _apply_overrides(cfg, args)


def cmd_synth(cfg: RunConfig, out: str | None) -> int:
    out_dir = Path(out) if out else Path(cfg.data_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = ds.synthesize_set(cfg.samples_per_class, cfg.seed,
                             (cfg.synth_points_min, cfg.synth_points_max),
                             cfg.noise_sigma, cfg.pose_jitter)
    names = []
    for j, lc in enumerate(data):
        i = j % cfg.samples_per_class
        name = f"{ds.CLASS_NAMES[lc.label]}_{i:04d}.xyz"
        ds.save_cloud(lc.points, out_dir / name, lc.label)
        names.append(name)
    ds.write_manifest(names, out_dir / "manifest.txt")
    print(f"wrote {len(names)} clouds and manifest.txt to {out_dir}")
    return 0


def cmd_preprocess(cfg: RunConfig, manifest: str, out: str | None) -> int:
    base = Path(manifest).parent
    rels = ds.read_manifest(manifest)
    out_dir = Path(out) if out else Path(cfg.data_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kept = []
    counts = dict.fromkeys(range(ds.NUM_CLASSES), 0)
    unlabeled = 0
    skipped = 0
    for rel in rels:
        try:
            pts, label = ds.read_cloud_file(base / rel)
        except (ValueError, OSError) as e:
            print(f"warning: skipping {rel}: {' '.join(str(e).split())}", file=sys.stderr)
            skipped += 1
            continue
        pts = resample_to_fixed_size(pts, cfg.points, fork_seed(cfg.seed, "preprocess", rel))
        pts = normalize_unit_sphere(pts)
        dest = out_dir / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        ds.save_cloud(pts, dest, label)
        kept.append(rel)
        if label is None:
            unlabeled += 1
        else:
            counts[label] += 1
    if not kept:
        raise RuntimeError(f"all {skipped} input files were skipped")
    ds.write_manifest(kept, out_dir / "manifest.txt")
    balance = ", ".join(f"{ds.CLASS_NAMES[c]}: {counts[c]}" for c in range(ds.NUM_CLASSES))
    print(f"class balance: {balance}" + (f", unlabeled: {unlabeled}" if unlabeled else ""))
    print(f"wrote {len(kept)} clouds at {cfg.points} points each to {out_dir}"
          + (f" ({skipped} skipped)" if skipped else ""))
    return 0


def _load_labeled(manifest: str) -> list[ds.LabeledCloud]:
    base = Path(manifest).parent
    return [ds.load_labeled_cloud(base / rel) for rel in ds.read_manifest(manifest)]


def cmd_train(cfg: RunConfig, manifest: str, out: str | None) -> int:
    data = _load_labeled(manifest)
    tc = cfg.train_config()
    tc.rng_seed = fork_seed(cfg.seed, "train")
    model_cfg = cfg.pointnet_config() if cfg.model == "pointnet" else cfg.pointnetpp_config()
    ckpt_path = Path(out) if out else Path(cfg.checkpoint_path)
    history_path = Path(str(ckpt_path) + ".history")
    try:
        result = train(cfg.model, data, tc, model_cfg)
    except TrainingDiverged as e:
        _write_history(history_path, e.history)
        raise RuntimeError(f"training diverged: {e} (partial history in {history_path})") from e
    _write_history(history_path, result.history)
    ckpt.save_checkpoint(ckpt_path, cfg.model, result.params, cfg)
    final = result.history[-1]
    print(f"wrote {ckpt_path} after {len(result.history)} epochs "
          f"(final loss {final.loss:.6f}, train accuracy {final.train_accuracy:.6f})")
    return 0


def _write_history(path: Path, history) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for h in history:
            f.write(f"{h.epoch},{h.loss:.6f},{h.train_accuracy:.6f}\n")


def cmd_eval(args) -> int:
    kind, params, cfg = ckpt.load_checkpoint(args.checkpoint)
    cfg = _apply_overrides(cfg, args)
    data = _load_labeled(args.manifest)
    report = evaluate(params, kind, data)
    text = report_text(report)
    sys.stdout.write(text)
    report_path = Path(args.out) if args.out else Path(cfg.report_path)
    with open(report_path, "w", encoding="ascii", newline="\n") as f:
        f.write(text)
    return 0


def cmd_predict(args) -> int:
    kind, params, cfg = ckpt.load_checkpoint(args.checkpoint)
    cfg = _apply_overrides(cfg, args)
    pts, _ = ds.read_cloud_file(args.cloud)
    if kind == "pointnetpp" and cfg.points < cfg.sa_centers[0]:
        raise RuntimeError(f"resample target {cfg.points} is below the model's minimum "
                           f"cloud size {cfg.sa_centers[0]}")
    # Sort before resampling so any permutation of the same file maps to the
    # same resampled cloud, making the whole pipeline order-independent.
    pts = canonical_order(pts)
    pts = resample_to_fixed_size(pts, cfg.points, fork_seed(cfg.seed, "predict"))
    pts = normalize_unit_sphere(pts)
    logits, _ = forward_logits(params, kind, pts)
    probs = softmax_probs(logits.data)
    pred = int(np.argmax(probs))
    print(f"{ds.CLASS_NAMES[pred]} " + " ".join(f"{p:.9f}" for p in probs))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(_config_from_args(args), args.out)
        if args.command == "preprocess":
            return cmd_preprocess(_config_from_args(args), args.manifest, args.out)
        if args.command == "train":
            return cmd_train(_config_from_args(args), args.manifest, args.out)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "predict":
            return cmd_predict(args)
        raise RuntimeError(f"unknown command {args.command!r}")
    except Exception as e:  # noqa: BLE001 - contract: one-line stderr diagnostic
        print(f"error: {' '.join(str(e).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
