"""The two-branch depth network and its prediction readouts.

One shared encoder feeds two structurally identical decoder branches: a
classification branch emitting K+1 per-bin logit channels and a regression
branch emitting one channel of meters. Prediction uses the classification
branch: softmax over bins, probability-weighted expected bin, dequantize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..depthmap import DepthMap, RgbImage
from ..quantize import QuantizationScheme
from .blocks import OutputHead, SamBlock, UpProj, UpProjCon, make_conv_unit
from .spec import NetworkSpec

BRANCHES = ("classification", "regression")


@dataclass
class ForwardOutputs:
    """Raw branch outputs plus encoder features for skip wiring and tests."""

    cls_logits: torch.Tensor             # (B, K+1, H, W)
    reg_depth: torch.Tensor              # (B, 1, H, W)
    encoder_features: dict[int, torch.Tensor]   # block index -> feature


def _build_encoder(spec: NetworkSpec) -> tuple[nn.ModuleList, list[int]]:
    blocks = nn.ModuleList()
    out_channels = []
    cin = 3
    for group in spec.encoder_blocks():
        layers = []
        for layer in group:
            for _ in range(layer.repeat):
                layers.append(
                    make_conv_unit(layer.kind, cin, layer.out_channels, layer.kernel,
                                   stride=layer.stride, dilation=layer.dilation)
                )
                cin = layer.out_channels
        blocks.append(nn.Sequential(*layers))
        out_channels.append(cin)
    return blocks, out_channels


class DecoderBranch(nn.Module):
    """One decoder chain plus its output head."""

    def __init__(self, spec: NetworkSpec, enc_channels: list[int], head_channels: int):
        super().__init__()
        self.block_specs = spec.decoder_blocks()
        self.skip_encoding = spec.skip_encoding
        self.skip_rgb = spec.skip_rgb
        mods = []
        for b in self.block_specs:
            if b.kind == "sam":
                mods.append(SamBlock(b.in_channels))
            elif b.kind == "upproj":
                mods.append(UpProj(b.in_channels, b.out_channels, scale=b.scale))
            else:
                skip_c = None
                if self.skip_encoding and b.skip_encoder_block is not None:
                    skip_c = enc_channels[b.skip_encoder_block - 1]
                rgb_c = 3 if self.skip_rgb else None
                mods.append(
                    UpProjCon(b.in_channels, b.out_channels, scale=b.scale,
                              skip_channels=skip_c, rgb_channels=rgb_c)
                )
        self.blocks = nn.ModuleList(mods)
        self.head = OutputHead(self.block_specs[-1].out_channels, head_channels)

    def forward(self, feature, encoder_features, rgb):
        x = feature
        for b, mod in zip(self.block_specs, self.blocks):
            if b.kind == "upproj_con":
                y = None
                if self.skip_encoding and b.skip_encoder_block is not None:
                    y = encoder_features[b.skip_encoder_block]
                z = None
                if self.skip_rgb:
                    h = x.shape[-2] * b.scale
                    w = x.shape[-1] * b.scale
                    z = F.interpolate(rgb, size=(h, w), mode="bilinear",
                                      align_corners=False)
                x = mod(x, y=y, z=z)
            else:
                x = mod(x)
        return self.head(x)


class DepthNet(nn.Module):
    """Shared encoder with classification and regression decoder branches."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        self.encoder, self._enc_channels = _build_encoder(spec)
        self.decoder_cls = DecoderBranch(spec, self._enc_channels, spec.num_bins + 1)
        self.decoder_reg = DecoderBranch(spec, self._enc_channels, 1)

    def _check_divisible(self, x: torch.Tensor) -> None:
        factor = self.spec.downsampling
        h, w = int(x.shape[-2]), int(x.shape[-1])
        for name, size in (("height", h), ("width", w)):
            if size % factor != 0:
                raise ValueError(
                    f"input {name} {size} not divisible by {factor} "
                    f"({self.spec.variant} depth-range encoder)"
                )

    def forward(self, x: torch.Tensor) -> ForwardOutputs:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected a (B, 3, H, W) input, got {tuple(x.shape)}")
        self._check_divisible(x)
        features: dict[int, torch.Tensor] = {}
        h = x
        for i, block in enumerate(self.encoder, start=1):
            h = block(h)
            features[i] = h
        cls_logits = self.decoder_cls(h, features, x)
        reg_depth = self.decoder_reg(h, features, x)
        return ForwardOutputs(cls_logits=cls_logits, reg_depth=reg_depth,
                              encoder_features=features)


def init_weights(model: nn.Module, seed: int) -> None:
    """Fan-in-scaled random initialization, reproducible from the seed."""
    torch.manual_seed(seed)
    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def build_model(spec: NetworkSpec, seed: int = 0) -> DepthNet:
    model = DepthNet(spec)
    init_weights(model, seed)
    return model


def image_to_tensor(image: RgbImage, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(
        np.ascontiguousarray(image.values.transpose(2, 0, 1))
    ).to(dtype)


def expected_bins_from_logits(cls_logits: torch.Tensor) -> torch.Tensor:
    """Per-pixel probability-weighted mean bin index, clamped into [0, K]."""
    probs = F.softmax(cls_logits, dim=-3)
    k = cls_logits.shape[-3] - 1
    idx_shape = [1] * cls_logits.dim()
    idx_shape[-3] = k + 1
    idx = torch.arange(k + 1, dtype=probs.dtype, device=probs.device).view(idx_shape)
    return (probs * idx).sum(dim=-3).clamp(0.0, float(k))


@torch.no_grad()
def predict_depth(model: DepthNet, image: RgbImage,
                  scheme: QuantizationScheme) -> DepthMap:
    """Classification-branch depth readout: softmax -> expected bin ->
    dequantize. Every output pixel is valid and lies in [alpha, beta]."""
    if scheme.num_bins != model.spec.num_bins:
        raise ValueError(
            f"scheme has {scheme.num_bins} bins but the model head was built "
            f"for {model.spec.num_bins}"
        )
    model.eval()
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    out = model.forward(x.unsqueeze(0))
    dbar = expected_bins_from_logits(out.cls_logits)[0]
    depth = scheme.alpha * np.power(
        10.0, dbar.cpu().numpy().astype(np.float64) * scheme.bin_width
    )
    values = np.clip(depth, scheme.alpha, scheme.beta).astype(np.float32)
    return DepthMap(values=values, valid=np.ones_like(values, dtype=bool))


@torch.no_grad()
def predict_depth_regression(model: DepthNet, image: RgbImage,
                             scheme: QuantizationScheme) -> DepthMap:
    """Regression-branch readout, clamped into [alpha, beta] so downstream
    metrics see positive depths (used by single-task ablation evaluation)."""
    model.eval()
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    out = model.forward(x.unsqueeze(0))
    values = out.reg_depth[0, 0].cpu().numpy().astype(np.float32)
    values = np.clip(values, scheme.alpha, scheme.beta)
    return DepthMap(values=values, valid=np.ones_like(values, dtype=bool))
