from .spec import (
    DecoderBlockSpec,
    LayerSpec,
    NetworkSpec,
    encoder_block_param_count,
    layer_param_count,
)
from .model import (
    BRANCHES,
    DepthNet,
    ForwardOutputs,
    build_model,
    expected_bins_from_logits,
    image_to_tensor,
    init_weights,
    predict_depth,
    predict_depth_regression,
)

__all__ = [
    "BRANCHES",
    "DecoderBlockSpec",
    "DepthNet",
    "ForwardOutputs",
    "LayerSpec",
    "NetworkSpec",
    "build_model",
    "encoder_block_param_count",
    "expected_bins_from_logits",
    "image_to_tensor",
    "init_weights",
    "layer_param_count",
    "predict_depth",
    "predict_depth_regression",
]
