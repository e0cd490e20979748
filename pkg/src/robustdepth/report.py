"""Report rendering: delimited metric tables, structured record streams,
and matplotlib figures written next to them.

Everything here is presentation; the numbers come in already computed.
Figures render through the Agg backend so reports work headless.
"""

from __future__ import annotations

import json

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .depthmap import DepthMap, RgbImage
from .metrics import METRIC_NAMES, MetricReport

_TABLE_COLUMNS = ("image_id",) + METRIC_NAMES + ("n_valid", "route", "route_ok")


def _metric_cells(report: MetricReport) -> list[str]:
    return [f"{getattr(report, name):.6f}" for name in METRIC_NAMES] + [str(report.n_valid)]


def write_metrics_table(rows, aggregate: MetricReport, path: str) -> None:
    """One TSV row per image plus an AGGREGATE row."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(_TABLE_COLUMNS) + "\n")
        for row in rows:
            cells = [row.record.image_id] + _metric_cells(row.report)
            cells += [row.decision.range, "yes" if row.routed_correctly else "no"]
            f.write("\t".join(cells) + "\n")
        f.write("\t".join(["AGGREGATE"] + _metric_cells(aggregate) + ["-", "-"]) + "\n")


def write_metrics_jsonl(rows, aggregate: MetricReport, routing_accuracy: float,
                        path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps({
                "image_id": row.record.image_id,
                "range_tag": row.record.range_tag,
                "decision": row.decision.range,
                "method": row.decision.method,
                "routed_correctly": row.routed_correctly,
                **row.report.as_dict(),
            }) + "\n")
        f.write(json.dumps({
            "image_id": None,
            "aggregate": True,
            "routing_accuracy": routing_accuracy,
            **aggregate.as_dict(),
        }) + "\n")


def save_metrics_figure(rows, aggregate: MetricReport, path: str) -> None:
    ids = [row.record.image_id for row in rows]
    rels = [row.report.rel for row in rows]
    colors = ["tab:blue" if row.routed_correctly else "tab:red" for row in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(ids)), 4))
    ax.bar(range(len(ids)), rels, color=colors)
    ax.axhline(aggregate.rel, color="k", linestyle="--", linewidth=1,
               label=f"aggregate REL {aggregate.rel:.3f}")
    ax.set_xticks(range(len(ids)))
    ax.set_xticklabels(ids, rotation=90, fontsize=6)
    ax.set_ylabel("REL")
    ax.set_title("Per-image relative error (red = misrouted)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curves(history: list, path: str) -> None:
    steps = [h["step"] for h in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, style in (("total", "-"), ("cls", ":"), ("reg", "--")):
        ys = [(h["step"], h[key]) for h in history if key in h]
        if ys:
            ax.plot([s for s, _ in ys], [v for _, v in ys], style, label=key)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    val = [(h["step"], h["val_rel"]) for h in history if "val_rel" in h]
    if val:
        ax2 = ax.twinx()
        ax2.plot([s for s, _ in val], [v for _, v in val], "o-", color="tab:green",
                 label="val REL")
        ax2.set_ylabel("validation REL", color="tab:green")
    ax.set_xlim(min(steps), max(steps))
    ax.legend(loc="upper right")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_depth_visualization(
    rgb: RgbImage,
    pred: DepthMap,
    path: str,
    gt: DepthMap | None = None,
    title: str | None = None,
) -> None:
    """Side-by-side RGB / predicted depth (/ ground truth) panel image."""
    panels = 2 + (gt is not None)
    fig, axes = plt.subplots(1, panels, figsize=(4 * panels, 4))
    axes[0].imshow(rgb.values)
    axes[0].set_title("RGB")
    vmax = float(pred.values[pred.valid].max()) if pred.valid.any() else 1.0
    if gt is not None and gt.valid.any():
        vmax = max(vmax, float(gt.values[gt.valid].max()))
    shown = np.where(pred.valid, pred.values, np.nan)
    im = axes[1].imshow(shown, cmap="magma", vmin=0.0, vmax=vmax)
    axes[1].set_title("predicted depth (m)")
    if gt is not None:
        gshown = np.where(gt.valid, gt.values, np.nan)
        axes[2].imshow(gshown, cmap="magma", vmin=0.0, vmax=vmax)
        axes[2].set_title("ground truth (m)")
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes[-1], fraction=0.046)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_ablation_table(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("variant\trel\trmse\tval_rel\n")
        for row in rows:
            val = f"{row.val_rel:.6f}" if row.val_rel is not None else "-"
            f.write(f"{row.variant.name}\t{row.rel:.6f}\t{row.rmse:.6f}\t{val}\n")


def save_ablation_figure(rows, path: str) -> None:
    names = [row.variant.name for row in rows]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(names)), 4))
    ax.bar(x - 0.2, [row.rel for row in rows], width=0.4, label="REL")
    ax.bar(x + 0.2, [row.rmse for row in rows], width=0.4, label="RMSE (m)")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_title("Ablation comparison")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_decisions_table(entries, path: str) -> None:
    """entries: iterable of (image_id, RoutingDecision)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("image_id\trange\tmethod\tevidence\n")
        for image_id, decision in entries:
            desc = decision.describe().split("(", 1)[1].rstrip(")")
            f.write(f"{image_id}\t{decision.range}\t{decision.method}\t{desc}\n")
