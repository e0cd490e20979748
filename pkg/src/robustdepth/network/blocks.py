"""Torch building blocks: conv+BN units, upsampling blocks, and the dilated
residual stack.

Every convolution is followed by batch normalization and ReLU except output
heads (raw logits / raw meters) and pre-sum projection paths, which stop at
BN so parallel paths merge before the shared rectification.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def _pad(kernel: int, dilation: int) -> int:
    return dilation * (kernel - 1) // 2


class ConvBN(nn.Module):
    """Convolution + batch norm + ReLU."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, dilation=1):
        super().__init__()
        self.conv = nn.Conv2d(
            in_channels, out_channels, kernel, stride=stride,
            padding=_pad(kernel, dilation), dilation=dilation, bias=False,
        )
        self.bn = nn.BatchNorm2d(out_channels)

    def forward(self, x):
        return F.relu(self.bn(self.conv(x)))


class ConvBNDw(nn.Module):
    """Depthwise separable convolution: per-channel spatial conv then a 1x1
    pointwise conv, each with batch norm and ReLU. Stride and dilation live
    on the depthwise stage."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, dilation=1):
        super().__init__()
        self.depthwise = nn.Conv2d(
            in_channels, in_channels, kernel, stride=stride,
            padding=_pad(kernel, dilation), dilation=dilation,
            groups=in_channels, bias=False,
        )
        self.bn_dw = nn.BatchNorm2d(in_channels)
        self.pointwise = nn.Conv2d(in_channels, out_channels, 1, bias=False)
        self.bn_pw = nn.BatchNorm2d(out_channels)

    def forward(self, x):
        x = F.relu(self.bn_dw(self.depthwise(x)))
        return F.relu(self.bn_pw(self.pointwise(x)))


def make_conv_unit(kind: str, in_channels: int, out_channels: int, kernel: int,
                   stride: int = 1, dilation: int = 1) -> nn.Module:
    if kind == "convbn":
        return ConvBN(in_channels, out_channels, kernel, stride=stride, dilation=dilation)
    if kind == "convbn_dw":
        return ConvBNDw(in_channels, out_channels, kernel, stride=stride, dilation=dilation)
    raise ValueError(f"unknown conv unit kind {kind!r}")


class UpProj(nn.Module):
    """Residual upsampling: bilinear x-t upsample, then a 5x5->3x3 conv path
    summed with a 5x5 projection path, halving channels."""

    def __init__(self, in_channels, out_channels, scale=2):
        super().__init__()
        self.scale = scale
        self.conv_a1 = nn.Conv2d(in_channels, out_channels, 5, padding=2, bias=False)
        self.bn_a1 = nn.BatchNorm2d(out_channels)
        self.conv_a2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn_a2 = nn.BatchNorm2d(out_channels)
        self.conv_b = nn.Conv2d(in_channels, out_channels, 5, padding=2, bias=False)
        self.bn_b = nn.BatchNorm2d(out_channels)

    def _pre_activation(self, x):
        if self.scale != 1:
            x = F.interpolate(x, scale_factor=self.scale, mode="bilinear",
                              align_corners=False)
        main = self.bn_a2(self.conv_a2(F.relu(self.bn_a1(self.conv_a1(x)))))
        return main + self.bn_b(self.conv_b(x))

    def forward(self, x):
        return F.relu(self._pre_activation(x))


class UpProjCon(nn.Module):
    """UpProj augmented with skip inputs: an encoder feature Y and a resized
    copy of the RGB input Z, each projected by a 1x1 conv and added before
    the shared rectification. Either path can be omitted (ablations)."""

    def __init__(self, in_channels, out_channels, scale=2,
                 skip_channels=None, rgb_channels=None):
        super().__init__()
        self.core = UpProj(in_channels, out_channels, scale=scale)
        self.proj_y = None
        self.proj_z = None
        if skip_channels is not None:
            self.proj_y = nn.Sequential(
                nn.Conv2d(skip_channels, out_channels, 1, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        if rgb_channels is not None:
            self.proj_z = nn.Sequential(
                nn.Conv2d(rgb_channels, out_channels, 1, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x, y=None, z=None):
        pre = self.core._pre_activation(x)
        for name, proj, inp in (("Y", self.proj_y, y), ("Z", self.proj_z, z)):
            if proj is None:
                continue
            if inp is None:
                raise ValueError(f"skip input {name} required but not provided")
            if inp.shape[-2:] != pre.shape[-2:]:
                raise ValueError(
                    f"skip input {name} resolution {tuple(inp.shape[-2:])} does not "
                    f"match block output {tuple(pre.shape[-2:])}"
                )
            pre = pre + proj(inp)
        return F.relu(pre)


class AtrousResidualUnit(nn.Module):
    """Residual unit of dilated 3x3 convolutions (dilations 1, 2, 4)."""

    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, dilation=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=2, dilation=2, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)
        self.conv3 = nn.Conv2d(channels, channels, 3, padding=4, dilation=4, bias=False)
        self.bn3 = nn.BatchNorm2d(channels)

    def forward(self, x):
        h = F.relu(self.bn1(self.conv1(x)))
        h = F.relu(self.bn2(self.conv2(h)))
        return x + self.bn3(self.conv3(h))


class SamBlock(nn.Module):
    """Three stacked dilated residual units; resolution and channels are
    preserved while the receptive field grows. Simplified stand-in for the
    stacked multi-scale module it replaces."""

    def __init__(self, channels, num_units=3):
        super().__init__()
        self.units = nn.ModuleList(AtrousResidualUnit(channels) for _ in range(num_units))

    def forward(self, x):
        for unit in self.units:
            x = unit(x)
        return x


class OutputHead(nn.Module):
    """Final 3x3 convolution to logits or meters; no normalization."""

    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1, bias=True)

    def forward(self, x):
        return self.conv(x)
