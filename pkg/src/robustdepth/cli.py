"""Command-line interface.

Subcommands: train, eval, infer, route, ablate, gen-synthetic. Every
subcommand takes --config plus targeted overrides; reports land as
delimited tables, JSONL record streams, and rendered figures.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ROUTER_METHODS, load_config
from .dataio import read_manifest, read_rgb_png, read_depth_png16, write_depth_png16
from .errors import ConfigError, DataError, DivergenceError
from .losses import LOSS_MODES
from .pipeline import (
    AblationVariant,
    ablation_run,
    evaluate,
    load_models,
    load_scene_assets,
    robust_side_infer,
)
from .routing import read_probability_file
from .synthetic import generate_dataset, synthetic_scene_probabilities

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="pipeline config file (INI)")
    p.add_argument("--sigma", type=float, default=None,
                   help="override coarse-depth routing threshold (m)")
    p.add_argument("--topk", type=int, default=None,
                   help="override scene-voting top-k")
    p.add_argument("--router", choices=ROUTER_METHODS, default=None,
                   help="override router method")
    p.add_argument("--seed", type=int, default=None, help="override training seed")
    p.add_argument("--width-mult", type=float, default=None,
                   help="override network width multiplier")


def _add_ckpts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ckpt-low", default=None)
    p.add_argument("--ckpt-high", default=None)
    p.add_argument("--ckpt-coarse", default=None)


def _config_from_args(args) -> "PipelineConfig":
    cfg = load_config(args.config)
    return cfg.with_overrides(
        sigma=args.sigma, top_k=args.topk, router=args.router,
        seed=args.seed, width_mult=args.width_mult,
    )


def _cmd_train(args) -> int:
    from dataclasses import replace
    from .report import save_loss_curves
    from .train import train

    cfg = _config_from_args(args)
    if args.role:
        cfg = replace(cfg, train=replace(cfg.train, role=args.role))
    if args.steps:
        cfg = replace(cfg, train=replace(cfg.train, steps=args.steps))
    result = train(cfg, args.manifest, args.out,
                   val_manifest_path=args.val_manifest, resume_path=args.resume)
    save_loss_curves(result.history, os.path.join(args.out, "loss_curves.png"))
    best = f"{result.best_val_rel:.4f}" if result.best_val_rel is not None else "-"
    print(f"trained {result.role} for {result.steps_run} steps; "
          f"best val REL {best} at step {result.best_step}")
    print(f"checkpoints: {result.best_path} {result.last_path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .report import save_metrics_figure, write_metrics_jsonl, write_metrics_table

    cfg = _config_from_args(args)
    models = load_models(cfg, low=args.ckpt_low, high=args.ckpt_high,
                         coarse=args.ckpt_coarse)
    result = evaluate(cfg, args.manifest, models, branch=args.branch)
    os.makedirs(args.out, exist_ok=True)
    write_metrics_table(result.rows, result.aggregate,
                        os.path.join(args.out, "metrics.tsv"))
    write_metrics_jsonl(result.rows, result.aggregate, result.routing_accuracy,
                        os.path.join(args.out, "metrics.jsonl"))
    save_metrics_figure(result.rows, result.aggregate,
                        os.path.join(args.out, "metrics.png"))
    a = result.aggregate
    print(f"evaluated {len(result.rows)} images "
          f"(router {cfg.router_method}, routing accuracy {result.routing_accuracy:.3f})")
    print(f"REL {a.rel:.4f}  RMSE {a.rmse:.4f} m  MAE {a.mae:.4f} m  "
          f"SILog {a.silog:.3f}  d1 {a.delta1:.3f}")
    print(f"reports written to {args.out}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    from .report import save_depth_visualization, write_decisions_table

    cfg = _config_from_args(args)
    models = load_models(cfg, low=args.ckpt_low, high=args.ckpt_high,
                         coarse=args.ckpt_coarse)
    inputs = []   # (image_id, rgb, gt or None)
    if args.manifest:
        for rec in read_manifest(args.manifest):
            inputs.append((rec.image_id, read_rgb_png(rec.rgb_path),
                           read_depth_png16(rec.depth_path)))
    for path in args.images:
        image_id = os.path.splitext(os.path.basename(path))[0]
        inputs.append((image_id, read_rgb_png(path), None))
    if not inputs:
        raise DataError("infer needs image paths or --manifest")

    probs_by_id = {}
    scene_table = None
    if cfg.router_method == "scene_classification":
        scene_table = load_scene_assets(cfg)
        probs_path = args.probs or cfg.scene_probs_path
        if not probs_path:
            raise ConfigError("scene_classification routing needs --probs")
        probs_by_id = read_probability_file(probs_path, scene_table)

    os.makedirs(args.out, exist_ok=True)
    decisions = []
    for image_id, rgb, gt in inputs:
        scene_probs = None
        if cfg.router_method == "scene_classification":
            if image_id not in probs_by_id:
                raise DataError(f"no scene probabilities for image {image_id!r}")
            scene_probs = probs_by_id[image_id]
        pred, decision = robust_side_infer(rgb, cfg, models,
                                           scene_probs=scene_probs,
                                           scene_table=scene_table)
        write_depth_png16(pred, os.path.join(args.out, f"{image_id}_depth.png"))
        save_depth_visualization(
            rgb, pred, os.path.join(args.out, f"{image_id}_viz.png"), gt=gt,
            title=f"{image_id}: routed {decision.describe()}",
        )
        decisions.append((image_id, decision))
        print(f"{image_id}: {decision.describe()}")
    write_decisions_table(decisions, os.path.join(args.out, "decisions.tsv"))
    print(f"wrote {len(decisions)} depth maps and visualizations to {args.out}")
    return EXIT_OK


def _cmd_route(args) -> int:
    from .report import write_decisions_table
    from .routing import route_by_coarse_depth, route_by_scene

    cfg = _config_from_args(args)
    records = read_manifest(args.manifest)
    decisions = []
    n_correct = 0
    if cfg.router_method == "scene_classification":
        scene_table = load_scene_assets(cfg)
        probs_path = args.probs or cfg.scene_probs_path
        if not probs_path:
            raise ConfigError("scene_classification routing needs --probs")
        probs_by_id = read_probability_file(probs_path, scene_table)
        for rec in records:
            if rec.image_id not in probs_by_id:
                raise DataError(f"no scene probabilities for image {rec.image_id!r}")
            d = route_by_scene(probs_by_id[rec.image_id], scene_table, k=cfg.top_k)
            decisions.append((rec.image_id, d))
            n_correct += int(d.range == rec.range_tag)
    elif cfg.router_method == "coarse_depth":
        from .pipeline import padded_predict
        models = load_models(cfg, coarse=args.ckpt_coarse, low=args.ckpt_low,
                             high=args.ckpt_high)
        for rec in records:
            rgb = read_rgb_png(rec.rgb_path)
            coarse = padded_predict(models.for_range("coarse"), rgb)
            d = route_by_coarse_depth(coarse, sigma=cfg.sigma)
            decisions.append((rec.image_id, d))
            n_correct += int(d.range == rec.range_tag)
    else:
        raise ConfigError(
            f"route command needs router method scene_classification or "
            f"coarse_depth, got {cfg.router_method!r}"
        )
    os.makedirs(args.out, exist_ok=True)
    write_decisions_table(decisions, os.path.join(args.out, "decisions.tsv"))
    print(f"routed {len(decisions)} images; "
          f"accuracy vs manifest tags {n_correct / len(decisions):.3f}")
    return EXIT_OK


def _parse_variant(s: str) -> AblationVariant:
    variant = AblationVariant(name=s)
    for part in s.split(","):
        key, sep, val = part.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"variant part {part!r} is not key=value")
        if key == "loss":
            if val not in LOSS_MODES:
                raise ConfigError(f"unknown loss mode {val!r}")
            variant.loss_mode = val
        elif key == "sam":
            variant.sam_position = None if val == "none" else int(val)
        elif key in ("skip_enc", "skip_rgb"):
            flag = val.lower() in ("yes", "true", "1", "on")
            if key == "skip_enc":
                variant.skip_encoding = flag
            else:
                variant.skip_rgb = flag
        else:
            raise ConfigError(f"unknown variant key {key!r}")
    return variant


def _cmd_ablate(args) -> int:
    from .report import save_ablation_figure, write_ablation_table

    cfg = _config_from_args(args)
    variants = [_parse_variant(s) for s in args.variant]
    if not variants:
        raise ConfigError("ablate needs at least one --variant")
    rows = ablation_run(cfg, args.manifest, variants, args.out,
                        val_manifest_path=args.val_manifest)
    write_ablation_table(rows, os.path.join(args.out, "ablation.tsv"))
    save_ablation_figure(rows, os.path.join(args.out, "ablation.png"))
    for row in rows:
        print(f"{row.variant.name}: REL {row.rel:.4f}  RMSE {row.rmse:.4f}")
    print(f"comparison written to {args.out}")
    return EXIT_OK


def _cmd_gen_synthetic(args) -> int:
    manifest = generate_dataset(
        args.out, args.n_low, args.n_high, args.width, args.height,
        seed=args.seed if args.seed is not None else 0,
        max_depth_low=args.max_depth_low, max_depth_high=args.max_depth_high,
    )
    print(f"wrote manifest {manifest}")
    if args.n_val_low or args.n_val_high:
        val_manifest = generate_dataset(
            args.out, args.n_val_low, args.n_val_high, args.width, args.height,
            seed=(args.seed if args.seed is not None else 0) + 1,
            max_depth_low=args.max_depth_low, max_depth_high=args.max_depth_high,
            manifest_name="val_manifest.tsv",
        )
        print(f"wrote validation manifest {val_manifest}")
    if args.emit_scene_probs:
        from .routing import load_default_scene_table, write_probability_file

        table = load_default_scene_table()
        low_idx = table.indices_by_tag("low")
        high_idx = table.indices_by_tag("high")
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        probs = {}
        for rec in read_manifest(manifest):
            probs[rec.image_id] = synthetic_scene_probabilities(
                len(table), low_idx, high_idx, rec.range_tag, k=15, rng=rng
            )
        probs_path = os.path.join(args.out, "scene_probs.txt")
        write_probability_file(probs, probs_path)
        print(f"wrote synthetic scene probabilities {probs_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustdepth",
        description="Two-stage robust single-image depth estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one depth-range network")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--val-manifest", default=None)
    p.add_argument("--role", choices=("low", "high", "coarse"), default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate robust inference over a manifest")
    _add_common(p)
    _add_ckpts(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--branch", choices=("classification", "regression"),
                   default="classification")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("infer", help="predict depth maps with visualization")
    _add_common(p)
    _add_ckpts(p)
    p.add_argument("images", nargs="*", help="RGB image paths")
    p.add_argument("--manifest", default=None)
    p.add_argument("--probs", default=None, help="scene probability file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("route", help="stage-one routing decisions only")
    _add_common(p)
    _add_ckpts(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--probs", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_route)

    p = sub.add_parser("ablate", help="train and compare config variants")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--val-manifest", default=None)
    p.add_argument("--variant", action="append", default=[],
                   help="e.g. loss=soft_cls_plus_reg | sam=none | skip_rgb=no")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-low", type=int, default=16)
    p.add_argument("--n-high", type=int, default=16)
    p.add_argument("--n-val-low", type=int, default=0)
    p.add_argument("--n-val-high", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth-low", type=float, default=None)
    p.add_argument("--max-depth-high", type=float, default=None)
    p.add_argument("--emit-scene-probs", action="store_true")
    p.set_defaults(func=_cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
