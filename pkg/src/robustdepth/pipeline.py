"""Two-stage robust inference and the evaluation/ablation harness.

Stage one routes an input to a depth range (scene-category voting, coarse
depth-max thresholding, or a forced override); stage two predicts depth
with the network specialized for that range. Inputs of awkward sizes are
zero-padded up to the variant's downsampling multiple and the prediction is
cropped back, so the returned map always matches the source geometry.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .checkpoint import LoadedCheckpoint, load_checkpoint
from .config import PipelineConfig
from .dataio import SampleRecord, crop_back, load_sample, read_manifest, zero_pad
from .depthmap import DepthMap, RgbImage
from .errors import ConfigError, DataError
from .metrics import MetricReport, aggregate_reports, compute_metrics
from .network.model import predict_depth, predict_depth_regression
from .routing import (
    CoarseDepthEvidence,
    RoutingDecision,
    SceneLabelTable,
    forced_decision,
    load_default_scene_table,
    load_scene_table,
    read_probability_file,
    route_by_coarse_depth,
    route_by_scene,
)


@dataclass
class ModelBundle:
    low: LoadedCheckpoint | None = None
    high: LoadedCheckpoint | None = None
    coarse: LoadedCheckpoint | None = None

    def for_range(self, range_tag: str) -> LoadedCheckpoint:
        ckpt = getattr(self, range_tag, None)
        if ckpt is None:
            raise ConfigError(f"no {range_tag} depth-range model loaded")
        return ckpt


def load_models(config: PipelineConfig, **path_overrides) -> ModelBundle:
    """Load the checkpoints the configured router method requires."""
    paths = dict(config.ckpt_paths)
    for role, p in path_overrides.items():
        if p:
            paths[role] = p
    method = config.router_method
    required = {
        "scene_classification": ("low", "high"),
        "coarse_depth": ("low", "high", "coarse"),
        "forced_low": ("low",),
        "forced_high": ("high",),
        "cde_only": ("coarse",),
    }[method]
    bundle = ModelBundle()
    for role in ("low", "high", "coarse"):
        if role in paths:
            setattr(bundle, role, load_checkpoint(paths[role]))
    for role in required:
        if getattr(bundle, role) is None:
            raise ConfigError(
                f"router method {method!r} requires a {role} checkpoint "
                f"(set paths.ckpt_{role} or pass --ckpt-{role})"
            )
    return bundle


def padded_predict(ckpt: LoadedCheckpoint, image: RgbImage,
                   branch: str = "classification") -> DepthMap:
    """Predict at a divisibility-safe size and crop back to source geometry."""
    factor = ckpt.model.spec.downsampling
    target_w = -(-image.width // factor) * factor
    target_h = -(-image.height // factor) * factor
    padded, offsets = zero_pad(image, target_w, target_h)
    predict = predict_depth if branch == "classification" else predict_depth_regression
    pred = predict(ckpt.model, padded, ckpt.scheme)
    return crop_back(pred, offsets)


def load_scene_assets(config: PipelineConfig) -> SceneLabelTable:
    if config.scene_table_path:
        return load_scene_table(config.scene_table_path)
    return load_default_scene_table()


def robust_side_infer(
    image: RgbImage,
    config: PipelineConfig,
    models: ModelBundle,
    scene_probs: np.ndarray | None = None,
    scene_table: SceneLabelTable | None = None,
    branch: str = "classification",
) -> tuple[DepthMap, RoutingDecision]:
    """Route the image to a depth range, then predict with that range's model.

    cde_only bypasses stage two and returns the coarse network's estimate
    directly (its decision records which range the threshold rule implies).
    """
    method = config.router_method
    if method == "scene_classification":
        if scene_probs is None:
            raise ConfigError(
                "scene_classification routing needs per-image scene probabilities"
            )
        table = scene_table if scene_table is not None else load_scene_assets(config)
        decision = route_by_scene(scene_probs, table, k=config.top_k)
    elif method == "coarse_depth":
        coarse_pred = padded_predict(models.for_range("coarse"), image)
        decision = route_by_coarse_depth(coarse_pred, sigma=config.sigma)
    elif method == "forced_low":
        decision = forced_decision("low")
    elif method == "forced_high":
        decision = forced_decision("high")
    elif method == "cde_only":
        coarse_pred = padded_predict(models.for_range("coarse"), image, branch=branch)
        d_max = coarse_pred.max_depth()
        decision = RoutingDecision(
            range="high" if d_max > config.sigma else "low",
            method="cde_only",
            evidence=CoarseDepthEvidence(d_max=d_max, sigma=config.sigma),
        )
        return coarse_pred, decision
    else:
        raise ConfigError(f"unknown router method {method!r}")

    pred = padded_predict(models.for_range(decision.range), image, branch=branch)
    return pred, decision


@dataclass
class EvaluationRow:
    record: SampleRecord
    report: MetricReport
    decision: RoutingDecision
    routed_correctly: bool


@dataclass
class EvaluationResult:
    rows: list
    aggregate: MetricReport
    routing_accuracy: float


def evaluate(
    config: PipelineConfig,
    manifest_path: str,
    models: ModelBundle,
    branch: str = "classification",
) -> EvaluationResult:
    """Run robust inference over a manifest: per-image metrics, the
    aggregate row, and the fraction routed to each sample's range tag."""
    records = read_manifest(manifest_path)
    if not records:
        raise DataError(f"manifest {manifest_path} is empty")
    probs_by_id = {}
    scene_table = None
    if config.router_method == "scene_classification":
        scene_table = load_scene_assets(config)
        if not config.scene_probs_path:
            raise ConfigError(
                "scene_classification routing needs router.scene_probs in the config"
            )
        probs_by_id = read_probability_file(config.scene_probs_path, scene_table)

    rows = []
    n_correct = 0
    for rec in records:
        rgb, gt = load_sample(rec)
        scene_probs = None
        if config.router_method == "scene_classification":
            if rec.image_id not in probs_by_id:
                raise DataError(
                    f"no scene probabilities for image {rec.image_id!r} in "
                    f"{config.scene_probs_path}"
                )
            scene_probs = probs_by_id[rec.image_id]
        pred, decision = robust_side_infer(
            rgb, config, models, scene_probs=scene_probs, scene_table=scene_table,
            branch=branch,
        )
        report = compute_metrics(pred, gt)
        correct = decision.range == rec.range_tag
        n_correct += int(correct)
        rows.append(EvaluationRow(rec, report, decision, correct))
    aggregate = aggregate_reports([r.report for r in rows])
    return EvaluationResult(
        rows=rows, aggregate=aggregate, routing_accuracy=n_correct / len(rows)
    )


@dataclass
class AblationVariant:
    """One row of an ablation: config deltas applied on a common base."""

    name: str
    loss_mode: str | None = None
    sam_position: int | None | str = "keep"   # "keep", None (remove), or 3/4/5
    skip_encoding: bool | None = None
    skip_rgb: bool | None = None

    def apply(self, config: PipelineConfig) -> PipelineConfig:
        cfg = config
        if self.loss_mode is not None:
            cfg = dc_replace(cfg, loss=dc_replace(cfg.loss, mode=self.loss_mode))
        if self.sam_position != "keep":
            cfg = dc_replace(cfg, sam_position=self.sam_position)
        if self.skip_encoding is not None:
            cfg = dc_replace(cfg, skip_encoding=self.skip_encoding)
        if self.skip_rgb is not None:
            cfg = dc_replace(cfg, skip_rgb=self.skip_rgb)
        return cfg


@dataclass
class AblationRow:
    variant: AblationVariant
    rel: float
    rmse: float
    val_rel: float | None


def ablation_run(
    config: PipelineConfig,
    manifest_path: str,
    variants: list,
    out_dir: str,
    val_manifest_path: str | None = None,
) -> list:
    """Train every variant under the identical seed and schedule on the same
    manifest, then evaluate each with its own test-time branch."""
    from .train import train  # local import to avoid a cycle

    rows = []
    for variant in variants:
        cfg = variant.apply(config)
        vdir = os.path.join(out_dir, variant.name.replace("+", "_"))
        result = train(cfg, manifest_path, vdir, val_manifest_path=val_manifest_path)
        ckpt = load_checkpoint(result.best_path)
        eval_manifest = val_manifest_path or manifest_path
        records = read_manifest(eval_manifest)
        reports = []
        for rec in records:
            rgb, gt = load_sample(rec)
            pred = padded_predict(ckpt, rgb, branch=cfg.loss.test_branch)
            reports.append(compute_metrics(pred, gt))
        agg = aggregate_reports(reports)
        rows.append(
            AblationRow(variant=variant, rel=agg.rel, rmse=agg.rmse,
                        val_rel=result.best_val_rel)
        )
    return rows
