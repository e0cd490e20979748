"""Desk-scale training loop: Adam on the combined multi-task loss with
periodic validation, best/last checkpointing, and exact resume.

Runs are deterministic for a fixed seed on one worker: batch sampling draws
from a serializable numpy generator, weight init is seeded, and checkpoints
capture optimizer moments plus both RNG streams so a resumed run reproduces
the continuation bit-for-bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from .checkpoint import (
    TrainState,
    capture_optimizer,
    load_checkpoint,
    restore_optimizer,
    save_checkpoint,
)
from .config import PipelineConfig
from .dataio import load_sample, read_manifest
from .errors import ConfigError, DataError, DivergenceError
from .losses import combined_loss_tensors
from .metrics import aggregate_reports, compute_metrics
from .network.model import (
    DepthNet,
    build_model,
    image_to_tensor,
    predict_depth,
    predict_depth_regression,
)
from .quantize import quantize_map


@dataclass
class TrainResult:
    role: str
    steps_run: int
    history: list            # one dict per step plus validation records
    best_val_rel: float | None
    best_step: int | None
    last_path: str
    best_path: str
    log_path: str


def _load_training_tensors(manifest_path: str, scheme, downsampling: int):
    records = read_manifest(manifest_path)
    if not records:
        raise DataError(f"manifest {manifest_path} is empty")
    rgbs, depths, bins, valids = [], [], [], []
    shape = None
    for rec in records:
        rgb, gt = load_sample(rec)
        if gt.height % downsampling or gt.width % downsampling:
            raise DataError(
                f"{rec.image_id}: size {gt.width}x{gt.height} not divisible by "
                f"{downsampling}"
            )
        if shape is None:
            shape = (gt.height, gt.width)
        elif (gt.height, gt.width) != shape:
            raise DataError(
                f"{rec.image_id}: mixed sample geometry "
                f"({gt.width}x{gt.height} vs {shape[1]}x{shape[0]}); "
                "training batches require uniform size"
            )
        qmap = quantize_map(gt, scheme)
        rgbs.append(image_to_tensor(rgb))
        depths.append(torch.from_numpy(gt.values))
        bins.append(torch.from_numpy(qmap.bins.astype(np.int64)))
        valids.append(torch.from_numpy(gt.valid))
    return records, (
        torch.stack(rgbs), torch.stack(depths), torch.stack(bins), torch.stack(valids),
    )


def _validate(model: DepthNet, scheme, records, branch: str) -> float:
    model.eval()
    predict = predict_depth if branch == "classification" else predict_depth_regression
    reports = []
    for rec in records:
        rgb, gt = load_sample(rec)
        reports.append(compute_metrics(predict(model, rgb, scheme), gt))
    model.train()
    return aggregate_reports(reports).rel


def train(
    config: PipelineConfig,
    manifest_path: str,
    out_dir: str,
    val_manifest_path: str | None = None,
    resume_path: str | None = None,
) -> TrainResult:
    """Train the configured role's network; returns paths to best/last
    checkpoints and the step-by-step history."""
    os.makedirs(out_dir, exist_ok=True)
    torch.set_num_threads(config.train.threads)
    role = config.train.role
    scheme = config.scheme_for_role(role)
    spec = config.network_spec_for_role(role)

    records, (rgbs, depths, bins, valids) = _load_training_tensors(
        manifest_path, scheme, spec.downsampling
    )
    val_records = read_manifest(val_manifest_path) if val_manifest_path else records

    if resume_path is not None:
        loaded = load_checkpoint(resume_path)
        if loaded.train_state is None:
            raise ConfigError(f"{resume_path} has no training state to resume from")
        model = loaded.model
        scheme = loaded.scheme
        optimizer = torch.optim.Adam(model.parameters(), lr=config.train.learning_rate)
        restore_optimizer(
            optimizer, loaded.train_state.optimizer_arrays, loaded.train_state.optimizer_meta
        )
        rng = np.random.default_rng()
        rng.bit_generator.state = loaded.train_state.np_rng_state
        torch.set_rng_state(torch.from_numpy(loaded.train_state.torch_rng_state.copy()))
        start_step = loaded.train_state.step
        best_val_rel = loaded.train_state.best_val_rel
        best_step = loaded.train_state.best_step
    else:
        model = build_model(spec, seed=config.train.seed)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.train.learning_rate)
        rng = np.random.default_rng(config.train.seed)
        start_step = 0
        best_val_rel = None
        best_step = None

    model.train()
    n = rgbs.shape[0]
    batch_size = config.train.batch_size
    total_steps = config.train.steps
    history: list[dict] = []
    log_path = os.path.join(out_dir, "train_log.jsonl")
    best_path = os.path.join(out_dir, "best.ckpt")
    last_path = os.path.join(out_dir, "last.ckpt")

    def _capture_state(step):
        arrays, meta = capture_optimizer(optimizer)
        return TrainState(
            step=step,
            np_rng_state=rng.bit_generator.state,
            torch_rng_state=torch.get_rng_state().numpy(),
            optimizer_arrays=arrays,
            optimizer_meta=meta,
            best_val_rel=best_val_rel,
            best_step=best_step,
        )

    final_step = start_step
    with open(log_path, "a" if resume_path else "w", encoding="utf-8") as log:
        for step in range(start_step + 1, total_steps + 1):
            idx = torch.from_numpy(rng.integers(0, n, size=batch_size))
            out = model.forward(rgbs[idx])
            total, terms = combined_loss_tensors(
                out.cls_logits, out.reg_depth, depths[idx], bins[idx], valids[idx],
                config.loss,
            )
            if not math.isfinite(terms["total"]):
                raise DivergenceError(
                    f"non-finite loss {terms['total']} at step {step} "
                    f"(mode={config.loss.mode}, lr={config.train.learning_rate})"
                )
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            final_step = step

            record = {"step": step, **terms}
            reached_target = False
            if step % config.train.val_every == 0 or step == total_steps:
                val_rel = _validate(model, scheme, val_records, config.loss.test_branch)
                record["val_rel"] = val_rel
                if best_val_rel is None or val_rel < best_val_rel:
                    best_val_rel = val_rel
                    best_step = step
                    save_checkpoint(best_path, model, scheme, role)
                target = config.train.target_val_rel
                reached_target = target is not None and val_rel < target
            history.append(record)
            log.write(json.dumps(record) + "\n")
            if reached_target:
                break

    save_checkpoint(last_path, model, scheme, role, train_state=_capture_state(final_step))
    if not os.path.exists(best_path):
        save_checkpoint(best_path, model, scheme, role)
    return TrainResult(
        role=role,
        steps_run=final_step - start_step,
        history=history,
        best_val_rel=best_val_rel,
        best_step=best_step,
        last_path=last_path,
        best_path=best_path,
        log_path=log_path,
    )
