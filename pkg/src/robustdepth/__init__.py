"""Two-stage robust single-image depth estimation.

Stage one classifies an RGB input into a low or high depth range (scene-
category voting or coarse depth-max thresholding); stage two predicts a
metric depth map with the network specialized for that range. The network
is a depthwise-separable encoder feeding twin decoder branches trained
jointly on a quantized-depth classification loss and an L1 regression loss.
"""

from .depthmap import DepthMap, QuantizedDepthMap, RgbImage
from .quantize import (
    COARSE_RANGE_SCHEME,
    HIGH_RANGE_SCHEME,
    LOW_RANGE_SCHEME,
    QuantizationScheme,
    dequantize,
    expected_bin,
    quantize,
    quantize_map,
)
from .losses import LossConfig, combined_loss, hard_cls_loss, l1_reg_loss, smooth_l1, soft_cls_loss
from .metrics import MetricReport, aggregate_reports, compute_metrics
from .network import NetworkSpec, build_model, predict_depth
from .routing import (
    RoutingDecision,
    SceneLabelTable,
    load_default_scene_table,
    load_scene_table,
    route_by_coarse_depth,
    route_by_scene,
)
from .config import PipelineConfig, load_config
from .pipeline import ModelBundle, evaluate, robust_side_infer
from .train import train

__version__ = "0.1.0"

__all__ = [
    "COARSE_RANGE_SCHEME",
    "DepthMap",
    "HIGH_RANGE_SCHEME",
    "LOW_RANGE_SCHEME",
    "LossConfig",
    "MetricReport",
    "ModelBundle",
    "NetworkSpec",
    "PipelineConfig",
    "QuantizationScheme",
    "QuantizedDepthMap",
    "RgbImage",
    "RoutingDecision",
    "SceneLabelTable",
    "aggregate_reports",
    "build_model",
    "combined_loss",
    "compute_metrics",
    "dequantize",
    "evaluate",
    "expected_bin",
    "hard_cls_loss",
    "l1_reg_loss",
    "load_config",
    "load_default_scene_table",
    "load_scene_table",
    "predict_depth",
    "quantize",
    "quantize_map",
    "robust_side_infer",
    "route_by_coarse_depth",
    "route_by_scene",
    "smooth_l1",
    "soft_cls_loss",
    "train",
]
