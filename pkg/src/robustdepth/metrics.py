"""Depth evaluation metrics over valid pixels.

Conventions are fixed once here so independent implementations agree:
iRMSE is in 1/km (inverse depths scaled by 1000), SILog carries the x100
convention, and the delta thresholds use strict < with ratio exactly
1.25^i counting as failure. Evaluation masks to pixels valid in both maps
with positive depths on both sides.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .depthmap import DepthMap

METRIC_NAMES = (
    "rel", "sq_rel", "rmse", "mae", "irmse", "silog", "delta1", "delta2", "delta3",
)


@dataclass(frozen=True)
class MetricReport:
    rel: float       # dimensionless
    sq_rel: float    # dimensionless
    rmse: float      # meters
    mae: float       # meters
    irmse: float     # 1/km
    silog: float     # dimensionless, x100
    delta1: float    # fraction in [0, 1]
    delta2: float
    delta3: float
    n_valid: int

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def evaluation_mask(pred: DepthMap, gt: DepthMap) -> np.ndarray:
    if pred.values.shape != gt.values.shape:
        raise ValueError(
            f"prediction shape {pred.values.shape} != ground truth shape {gt.values.shape}"
        )
    return gt.valid & pred.valid & (gt.values > 0) & (pred.values > 0)


def _metrics_from_pixels(p: np.ndarray, g: np.ndarray) -> MetricReport:
    p = p.astype(np.float64)
    g = g.astype(np.float64)
    diff = p - g
    e = np.log(p) - np.log(g)
    ratio = np.maximum(p / g, g / p)
    var_e = float(np.mean(e ** 2) - np.mean(e) ** 2)
    return MetricReport(
        rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rmse=float(np.sqrt(np.mean(diff ** 2))),
        mae=float(np.mean(np.abs(diff))),
        irmse=float(np.sqrt(np.mean((1000.0 / p - 1000.0 / g) ** 2))),
        silog=float(100.0 * np.sqrt(max(var_e, 0.0))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        n_valid=int(p.size),
    )


def compute_metrics(pred: DepthMap, gt: DepthMap) -> MetricReport:
    """Compute all metrics over the joint evaluation mask."""
    mask = evaluation_mask(pred, gt)
    if not mask.any():
        raise ValueError("no valid pixels to evaluate")
    return _metrics_from_pixels(pred.values[mask], gt.values[mask])


def compute_metrics_pooled(pairs: list[tuple[DepthMap, DepthMap]]) -> MetricReport:
    """Pool masked pixels across images into one report (leaderboards differ
    on this; per-image averaging via aggregate_reports is the default)."""
    ps, gs = [], []
    for pred, gt in pairs:
        mask = evaluation_mask(pred, gt)
        ps.append(pred.values[mask])
        gs.append(gt.values[mask])
    p = np.concatenate(ps) if ps else np.array([])
    if p.size == 0:
        raise ValueError("no valid pixels to evaluate")
    return _metrics_from_pixels(p, np.concatenate(gs))


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Unweighted per-image mean of each metric; n_valid is summed."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    mean = {
        name: float(np.mean([getattr(r, name) for r in reports])) for name in METRIC_NAMES
    }
    return MetricReport(n_valid=int(sum(r.n_valid for r in reports)), **mean)
