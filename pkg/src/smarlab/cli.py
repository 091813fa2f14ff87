"""Command line: train / eval / analyze / gen-data.

Configuration comes from defaults, then an optional --config file (flat
TOML, exactly the TrainConfig keys), then per-key flags. Output lands in
--outdir, which falls back to $SMARLAB_OUTDIR and then ./runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from smarlab import analysis
from smarlab.config import TrainConfig, config_to_toml, load_config
from smarlab.data import SynthConfig, dump_batches
from smarlab.errors import ConfigError, SmarlabError
from smarlab.model import load_checkpoint, save_checkpoint
from smarlab.trainer import (
    EvalStats,
    evaluate,
    read_eval_log,
    read_metrics,
    train,
    write_eval_log,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in (bool, "bool"):
            group.add_argument(flag, dest=f.name, default=None,
                               action=argparse.BooleanOptionalAction)
        else:
            group.add_argument(flag, dest=f.name, default=None, metavar="V")


def _collect_config(args) -> TrainConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(TrainConfig)
        if getattr(args, f.name, None) is not None
    }
    return load_config(args.config, overrides)


def _outdir(args) -> Path:
    root = args.outdir or os.environ.get("SMARLAB_OUTDIR") or "runs"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_train(args) -> int:
    cfg = _collect_config(args)
    outdir = _outdir(args)
    metrics_path = Path(args.metrics) if args.metrics else outdir / "metrics.jsonl"
    checkpoint_path = Path(args.checkpoint) if args.checkpoint else outdir / "checkpoint.npz"

    print("accepted config:")
    print(config_to_toml(cfg), end="")
    model, metrics = train(cfg, metrics_path=metrics_path)
    save_checkpoint(model, checkpoint_path,
                    extra={"train_config": dataclasses.asdict(cfg)})

    last = metrics[-1]
    print(f"finished {cfg.steps} steps; final batch accuracy {last.accuracy:.3f}")
    print(f"metrics  -> {metrics_path}")
    print(f"checkpoint -> {checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    model, extra = load_checkpoint(args.checkpoint)
    stored = extra.get("train_config")
    if stored is None:
        raise ConfigError(f"{args.checkpoint}: no training config stored; cannot evaluate")
    cfg = TrainConfig(**stored)
    n_batches = args.batches if args.batches is not None else cfg.eval_batches

    stats = evaluate(model, cfg, n_batches)
    out_path = Path(args.out) if args.out else _outdir(args) / "eval.jsonl"
    write_eval_log(out_path, stats, cfg)

    if stats.empty:
        print("evaluation over 0 batches: empty (no statistics)")
    else:
        print(f"evaluation over {stats.n_batches} batches: accuracy {stats.accuracy:.3f}")
        for layer in range(stats.n_layers):
            mean_d = stats.mean_d(layer)
            shown = "undefined" if mean_d is None else f"{mean_d:.4f}"
            print(f"  layer {layer}: mean d_sym_kl {shown}")
    print(f"eval log -> {out_path}")
    return 0


def _stats_from_training_log(records: list[dict], top_k: int, vision_fraction: float) -> EvalStats:
    """Reconstruct aggregate selection statistics from a training metrics
    log. Per-step shares average exactly to aggregate shares because the
    per-batch modality split is constant for a given config; combined
    loads additionally need the top_k and vision fraction, which the log
    does not carry."""
    if not records:
        raise SmarlabError("empty metrics log")
    n_layers = len(records[0]["per_layer"])
    n_experts = len(records[0]["per_layer"][0]["expert_shares_vision"])
    d_values = [[] for _ in range(n_layers)]
    share_v = np.zeros((n_layers, n_experts))
    share_t = np.zeros((n_layers, n_experts))
    for rec in records:
        for entry in rec["per_layer"]:
            layer = entry["layer"]
            if entry["d_sym_kl"] is not None:
                d_values[layer].append(float(entry["d_sym_kl"]))
            share_v[layer] += np.asarray(entry["expert_shares_vision"])
            share_t[layer] += np.asarray(entry["expert_shares_text"])
    share_v /= len(records)
    share_t /= len(records)
    # scale shares to pseudo-counts over one token so ratios (shares,
    # loads, entropies) come out identical to exact counting
    vf = vision_fraction
    return EvalStats(
        n_batches=len(records),
        n_layers=n_layers,
        n_experts=n_experts,
        top_k=top_k,
        d_values=d_values,
        counts_vision=share_v * top_k * vf,
        counts_text=share_t * top_k * (1.0 - vf),
        tokens_vision=vf,
        tokens_text=1.0 - vf,
        accuracy=None,
    )


def _cmd_analyze(args) -> int:
    path = Path(args.metrics)
    if not path.exists():
        raise SmarlabError(f"metrics file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        first_line = fh.readline().strip()
    first = json.loads(first_line) if first_line else {}

    if first.get("kind") == "smarlab-eval":
        stats = read_eval_log(path)
    elif "step" in first and "per_layer" in first:
        stats = _stats_from_training_log(read_metrics(path), args.top_k, args.vision_fraction)
    else:
        raise SmarlabError(f"{path}: neither an evaluation log nor a training metrics log")

    outdir = Path(args.out) if args.out else _outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    curves_path = outdir / "mrd_curves.csv"
    pref_path = outdir / "expert_pref.csv"
    collapse_path = outdir / "collapse.csv"

    analysis.write_mrd_curves_csv(curves_path, analysis.mrd_curves(stats))
    analysis.write_expert_pref_csv(pref_path, analysis.expert_preference(stats))
    analysis.write_collapse_csv(collapse_path, analysis.detect_collapse(stats, args.threshold))

    for p in (curves_path, pref_path, collapse_path):
        print(f"wrote {p}")
    return 0


def _cmd_gen_data(args) -> int:
    cfg = SynthConfig(
        seed=args.seed,
        vision_fraction=args.vision_fraction,
        tokens_per_batch=args.tokens_per_batch,
        d_vision=args.d_vision,
        d_text=args.d_text,
        classes=args.classes,
        clusters_per_modality=args.clusters_per_modality,
        cluster_spread=args.cluster_spread,
    )
    out = Path(args.out) if args.out else _outdir(args) / "batches.jsonl"
    dump_batches(cfg, range(args.batches), out)
    print(f"wrote {args.batches} batches -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smarlab",
        description="train and dissect a toy modality-aware mixture-of-experts router",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write metrics + checkpoint")
    p_train.add_argument("--config", help="flat TOML config file")
    p_train.add_argument("--outdir", help="output directory (default $SMARLAB_OUTDIR or ./runs)")
    p_train.add_argument("--metrics", help="metrics JSONL path (default <outdir>/metrics.jsonl)")
    p_train.add_argument("--checkpoint", help="checkpoint path (default <outdir>/checkpoint.npz)")
    _add_config_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on fresh batches")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--batches", type=int, default=None)
    p_eval.add_argument("--out", help="evaluation log path (default <outdir>/eval.jsonl)")
    p_eval.add_argument("--outdir", help="output directory (default $SMARLAB_OUTDIR or ./runs)")
    p_eval.set_defaults(func=_cmd_eval)

    p_an = sub.add_parser("analyze", help="write mrd_curves/expert_pref/collapse CSVs")
    p_an.add_argument("--metrics", required=True,
                      help="evaluation log (preferred) or training metrics JSONL")
    p_an.add_argument("--out", help="directory for the CSV files")
    p_an.add_argument("--outdir", help="fallback output directory")
    p_an.add_argument("--threshold", type=float, default=0.6,
                      help="collapse flag threshold on max expert load")
    p_an.add_argument("--top-k", type=int, default=2,
                      help="top_k of the run (training logs only)")
    p_an.add_argument("--vision-fraction", type=float, default=0.8,
                      help="vision fraction of the run (training logs only)")
    p_an.set_defaults(func=_cmd_analyze)

    p_gen = sub.add_parser("gen-data", help="dump synthetic batches to JSONL")
    p_gen.add_argument("--out")
    p_gen.add_argument("--outdir")
    p_gen.add_argument("--batches", type=int, default=10)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--vision-fraction", type=float, default=0.8)
    p_gen.add_argument("--tokens-per-batch", type=int, default=64)
    p_gen.add_argument("--d-vision", type=int, default=16)
    p_gen.add_argument("--d-text", type=int, default=12)
    p_gen.add_argument("--classes", type=int, default=8)
    p_gen.add_argument("--clusters-per-modality", type=int, default=8)
    p_gen.add_argument("--cluster-spread", type=float, default=0.25)
    p_gen.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SmarlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
