"""Multi-task training objective: expected-bin soft classification, hard
cross-entropy classification, and L1 regression, combined linearly.

All losses reduce over valid pixels only (sparse ground truth contributes
nothing outside its mask) and accept single images or batches. The soft
classification loss penalizes the smooth-L1 gap between the probability-
weighted expected bin and the quantized ground-truth bin; it is measured in
bin units while the regression loss is in meters, combined with unit
weights by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .depthmap import DepthMap, QuantizedDepthMap
from .network.model import ForwardOutputs
from .quantize import QuantizationScheme, quantize_map

LOSS_MODES = ("reg", "hard_cls", "soft_cls", "hard_cls_plus_reg", "soft_cls_plus_reg")
REDUCTIONS = ("mean_over_valid", "sum_over_valid")


@dataclass(frozen=True)
class LossConfig:
    mode: str = "soft_cls_plus_reg"
    w1: float = 1.0          # classification term weight
    w2: float = 1.0          # regression term weight
    reduction: str = "mean_over_valid"

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise ValueError(f"mode must be one of {LOSS_MODES}, got {self.mode!r}")
        if self.reduction not in REDUCTIONS:
            raise ValueError(
                f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}"
            )
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.w1 == 0 and self.w2 == 0:
            raise ValueError("at least one loss weight must be positive")

    @property
    def uses_cls(self) -> bool:
        return self.mode != "reg"

    @property
    def uses_reg(self) -> bool:
        return self.mode in ("reg", "hard_cls_plus_reg", "soft_cls_plus_reg")

    @property
    def cls_kind(self) -> str | None:
        if self.mode in ("soft_cls", "soft_cls_plus_reg"):
            return "soft"
        if self.mode in ("hard_cls", "hard_cls_plus_reg"):
            return "hard"
        return None

    @property
    def test_branch(self) -> str:
        """Branch whose output is evaluated at test time for this mode."""
        return "regression" if self.mode == "reg" else "classification"


def smooth_l1(y):
    """0.5 y^2 inside |y| < 1, |y| - 0.5 outside; C1 at the joint."""
    if isinstance(y, torch.Tensor):
        a = y.abs()
        return torch.where(a < 1.0, 0.5 * y * y, a - 0.5)
    a = abs(float(y))
    return 0.5 * a * a if a < 1.0 else a - 0.5


def _reduce(per_pixel: torch.Tensor, valid: torch.Tensor, reduction: str) -> torch.Tensor:
    if valid.shape != per_pixel.shape:
        raise ValueError(
            f"mask shape {tuple(valid.shape)} does not match loss shape "
            f"{tuple(per_pixel.shape)}"
        )
    selected = per_pixel[valid]
    if selected.numel() == 0:
        raise ValueError("loss has no valid target pixels")
    return selected.mean() if reduction == "mean_over_valid" else selected.sum()


def _expected_bins(cls_logits: torch.Tensor) -> torch.Tensor:
    probs = F.softmax(cls_logits, dim=-3)
    k = cls_logits.shape[-3] - 1
    shape = [1] * cls_logits.dim()
    shape[-3] = k + 1
    idx = torch.arange(k + 1, dtype=probs.dtype, device=probs.device).view(shape)
    return (probs * idx).sum(dim=-3)


def soft_cls_loss(cls_logits: torch.Tensor, gt_bins: torch.Tensor,
                  valid: torch.Tensor, reduction: str = "mean_over_valid") -> torch.Tensor:
    """Smooth-L1 between the expected bin and the ground-truth bin."""
    d = _expected_bins(cls_logits)
    return _reduce(smooth_l1(d - gt_bins.to(d.dtype)), valid, reduction)


def hard_cls_loss(cls_logits: torch.Tensor, gt_bins: torch.Tensor,
                  valid: torch.Tensor, reduction: str = "mean_over_valid") -> torch.Tensor:
    """Per-pixel cross-entropy against the ground-truth bin index."""
    logp = F.log_softmax(cls_logits, dim=-3)
    nll = -torch.gather(logp, -3, gt_bins.long().unsqueeze(-3)).squeeze(-3)
    return _reduce(nll, valid, reduction)


def l1_reg_loss(reg_depth: torch.Tensor, gt_depth: torch.Tensor,
                valid: torch.Tensor, reduction: str = "mean_over_valid") -> torch.Tensor:
    """Absolute depth error in meters over valid pixels."""
    pred = reg_depth.squeeze(-3) if reg_depth.dim() == valid.dim() + 1 else reg_depth
    return _reduce((pred - gt_depth.to(pred.dtype)).abs(), valid, reduction)


def bins_tensor(qmap: QuantizedDepthMap) -> torch.Tensor:
    return torch.from_numpy(qmap.bins.astype(np.int64))


def valid_tensor(valid: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(valid))


def combined_loss_tensors(
    cls_logits: torch.Tensor,
    reg_depth: torch.Tensor,
    gt_depth: torch.Tensor,
    gt_bins: torch.Tensor,
    valid: torch.Tensor,
    config: LossConfig,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted multi-task loss on raw tensors; returns (total, per-term log)."""
    terms: dict[str, float] = {}
    total = None
    if config.uses_cls:
        if config.cls_kind == "soft":
            cls_term = soft_cls_loss(cls_logits, gt_bins, valid, config.reduction)
        else:
            cls_term = hard_cls_loss(cls_logits, gt_bins, valid, config.reduction)
        terms["cls"] = float(cls_term.detach())
        total = config.w1 * cls_term
    if config.uses_reg:
        reg_term = l1_reg_loss(reg_depth, gt_depth, valid, config.reduction)
        terms["reg"] = float(reg_term.detach())
        weighted = config.w2 * reg_term
        total = weighted if total is None else total + weighted
    terms["total"] = float(total.detach())
    return total, terms


def combined_loss(
    outputs: ForwardOutputs,
    gt: DepthMap,
    scheme: QuantizationScheme,
    config: LossConfig,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Single-image convenience wrapper: quantizes the ground truth and
    applies the configured combination."""
    qmap = quantize_map(gt, scheme)
    dtype = outputs.cls_logits.dtype
    gt_depth = torch.from_numpy(gt.values).to(dtype)
    gt_bins = bins_tensor(qmap)
    valid = valid_tensor(gt.valid)
    cls_logits = outputs.cls_logits
    reg_depth = outputs.reg_depth
    if cls_logits.dim() == 4:
        if cls_logits.shape[0] != 1:
            raise ValueError("combined_loss takes a single image; use "
                             "combined_loss_tensors for batches")
        cls_logits = cls_logits[0]
        reg_depth = reg_depth[0]
    return combined_loss_tensors(cls_logits, reg_depth, gt_depth, gt_bins, valid, config)
