"""Declarative layer tables for the two-branch depth network.

The encoder comes in two depth-range variants sharing the first two blocks:
the low variant downsamples x32 across its five blocks, the high variant
only x4 (blocks 3-5 keep stride 1). Each decoder branch mirrors the encoder
back to full resolution with channel-halving upsampling blocks, optionally
hosting a dilated-convolution stack (SAM) at block 3, 4, or 5. A width
multiplier shrinks every channel count for desk-scale training; 1 gives the
printed architecture.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

LAYER_KINDS = ("convbn", "convbn_dw")
DECODER_KINDS = ("upproj", "upproj_con", "sam")
VARIANTS = ("low", "high")

# Encoder blocks consuming skip connections; block 5's output feeds the
# decoder directly and is not a skip candidate.
_SKIP_CANDIDATES = (1, 2, 3, 4)


@dataclass(frozen=True)
class LayerSpec:
    """One encoder layer (possibly repeated)."""

    kind: str             # "convbn" | "convbn_dw"
    kernel: int
    out_channels: int
    stride: int = 1
    dilation: int = 1
    repeat: int = 1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if self.dilation < 1 or self.out_channels < 1 or self.repeat < 1:
            raise ValueError("dilation, out_channels, and repeat must be >= 1")

    @property
    def depthwise(self) -> bool:
        return self.kind == "convbn_dw"


@dataclass(frozen=True)
class DecoderBlockSpec:
    """One decoder block with resolved channels and skip wiring."""

    kind: str                  # "upproj" | "upproj_con" | "sam"
    scale: int                 # t; output resolution = input * t
    in_channels: int
    out_channels: int
    skip_encoder_block: int | None = None   # encoder block index feeding Y


def _l(kind, kernel, out_channels, stride=1, dilation=1, repeat=1):
    return LayerSpec(kind, kernel, out_channels, stride=stride, dilation=dilation, repeat=repeat)


_ENCODER_TABLES = {
    "low": (
        (_l("convbn", 3, 32, stride=2), _l("convbn", 3, 64)),
        (_l("convbn_dw", 3, 64, repeat=3), _l("convbn_dw", 3, 128, stride=2)),
        (_l("convbn_dw", 3, 128, repeat=3), _l("convbn_dw", 3, 256, stride=2)),
        (_l("convbn_dw", 3, 32, dilation=2, repeat=12), _l("convbn_dw", 3, 256, stride=2)),
        (_l("convbn_dw", 3, 256, stride=2), _l("convbn", 1, 512)),
    ),
    "high": (
        (_l("convbn", 3, 32, stride=2), _l("convbn", 3, 64)),
        (_l("convbn_dw", 3, 64, repeat=3), _l("convbn_dw", 3, 128, stride=2)),
        (_l("convbn_dw", 3, 128, repeat=3), _l("convbn_dw", 3, 256)),
        (_l("convbn_dw", 3, 32, dilation=2, repeat=12), _l("convbn_dw", 3, 256)),
        (_l("convbn_dw", 3, 256), _l("convbn", 1, 128)),
    ),
}

DOWNSAMPLING = {"low": 32, "high": 4}


@dataclass(frozen=True)
class NetworkSpec:
    """Everything needed to build (or rebuild) one depth network."""

    variant: str
    num_bins: int                      # K; classification head emits K+1 channels
    width_multiplier: float = 1.0
    sam_position: int | None = None    # decoder block 3, 4, or 5
    skip_encoding: bool = True
    skip_rgb: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be >= 1, got {self.num_bins}")
        if not (0.0 < self.width_multiplier <= 1.0):
            raise ValueError(
                f"width_multiplier must be in (0, 1], got {self.width_multiplier}"
            )
        if self.sam_position is not None and self.sam_position not in (3, 4, 5):
            raise ValueError(
                f"sam_position must be 3, 4, 5, or None, got {self.sam_position}"
            )

    @classmethod
    def default_for(cls, variant: str, num_bins: int, width_multiplier: float = 1.0,
                    **kwargs) -> "NetworkSpec":
        """Table defaults: the high-range decoder hosts SAM at block 3."""
        if variant == "high":
            kwargs.setdefault("sam_position", 3)
        return cls(variant=variant, num_bins=num_bins,
                   width_multiplier=width_multiplier, **kwargs)

    def without_sam(self) -> "NetworkSpec":
        return replace(self, sam_position=None)

    def _scale(self, channels: int) -> int:
        return max(1, int(round(channels * self.width_multiplier)))

    @property
    def downsampling(self) -> int:
        return DOWNSAMPLING[self.variant]

    def encoder_blocks(self) -> list[list[LayerSpec]]:
        """Table rows with channel counts scaled by the width multiplier."""
        blocks = []
        for group in _ENCODER_TABLES[self.variant]:
            blocks.append([replace(l, out_channels=self._scale(l.out_channels)) for l in group])
        return blocks

    def encoder_block_factors(self) -> list[int]:
        """Cumulative downsampling factor after each encoder block."""
        factors = []
        f = 1
        for group in _ENCODER_TABLES[self.variant]:
            for layer in group:
                f *= layer.stride ** layer.repeat
            factors.append(f)
        return factors

    def encoder_out_channels(self) -> int:
        return self.encoder_blocks()[-1][-1].out_channels

    def decoder_blocks(self) -> list[DecoderBlockSpec]:
        """Decoder chain (shared layout for both branches) with skip wiring.

        Each upsampling block halves channels; SAM (when placed) preserves
        them. Skip wiring pairs every upproj_con block with the deepest
        unused encoder block whose output resolution matches the block's
        output resolution.
        """
        c = self.encoder_out_channels()
        if self.variant == "low":
            base = [("upproj_con", 2)] * 4 + [("upproj", 2)]
        else:
            base = [("upproj_con", 1), ("upproj_con", 1), ("upproj_con", 2), ("upproj", 2)]
        chain: list[tuple[str, int]] = list(base)
        if self.sam_position is not None:
            pos = self.sam_position - 1
            if pos > len(chain):
                raise ValueError(
                    f"sam_position {self.sam_position} beyond decoder chain of "
                    f"length {len(chain)}"
                )
            chain.insert(pos, ("sam", 1))

        enc_factors = self.encoder_block_factors()
        available = [b for b in _SKIP_CANDIDATES]
        blocks: list[DecoderBlockSpec] = []
        factor = self.downsampling
        for kind, scale in chain:
            out_factor = factor // scale if scale > 1 else factor
            if kind == "sam":
                blocks.append(DecoderBlockSpec(kind, scale, c, c))
            else:
                out_c = max(1, c // 2)
                skip = None
                if kind == "upproj_con":
                    matches = [b for b in available if enc_factors[b - 1] == out_factor]
                    if not matches:
                        raise ValueError(
                            f"no unused encoder block at 1/{out_factor} resolution "
                            f"to skip into decoder block {len(blocks) + 1}"
                        )
                    skip = max(matches)
                    available.remove(skip)
                blocks.append(DecoderBlockSpec(kind, scale, c, out_c, skip_encoder_block=skip))
                c = out_c
            factor = out_factor
        if factor != 1:
            raise ValueError(f"decoder chain ends at 1/{factor} resolution, expected full")
        return blocks

    def head_in_channels(self) -> int:
        return self.decoder_blocks()[-1].out_channels

    def layout(self) -> dict:
        """Expanded structural description (for topology comparisons and docs)."""
        return {
            "variant": self.variant,
            "encoder": [
                [
                    {
                        "kind": l.kind, "kernel": l.kernel, "out_channels": l.out_channels,
                        "stride": l.stride, "dilation": l.dilation, "repeat": l.repeat,
                    }
                    for l in group
                ]
                for group in self.encoder_blocks()
            ],
            "decoder": [
                {
                    "kind": b.kind, "scale": b.scale, "in_channels": b.in_channels,
                    "out_channels": b.out_channels,
                    "skip_encoder_block": b.skip_encoder_block if self.skip_encoding else None,
                    "skip_rgb": self.skip_rgb and b.kind == "upproj_con",
                }
                for b in self.decoder_blocks()
            ],
            "heads": {"classification": self.num_bins + 1, "regression": 1},
        }

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "num_bins": self.num_bins,
            "width_multiplier": self.width_multiplier,
            "sam_position": self.sam_position,
            "skip_encoding": self.skip_encoding,
            "skip_rgb": self.skip_rgb,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            variant=d["variant"],
            num_bins=int(d["num_bins"]),
            width_multiplier=float(d["width_multiplier"]),
            sam_position=d.get("sam_position"),
            skip_encoding=bool(d.get("skip_encoding", True)),
            skip_rgb=bool(d.get("skip_rgb", True)),
        )


def _conv_params(kernel: int, cin: int, cout: int) -> int:
    return kernel * kernel * cin * cout + 2 * cout  # weights + BN affine


def layer_param_count(layer: LayerSpec, in_channels: int, force_dense: bool = False) -> int:
    """Analytic parameter count of one (possibly repeated) encoder layer.

    force_dense counts a depthwise-separable layer as if it were a dense
    convolution of the same geometry, for efficiency comparisons.
    """
    total = 0
    cin = in_channels
    for _ in range(layer.repeat):
        cout = layer.out_channels
        if layer.depthwise and not force_dense:
            total += layer.kernel * layer.kernel * cin + 2 * cin   # depthwise + BN
            total += cin * cout + 2 * cout                         # pointwise + BN
        else:
            total += _conv_params(layer.kernel, cin, cout)
        cin = cout
    return total


def encoder_block_param_count(
    spec: NetworkSpec, block: int, force_dense: bool = False
) -> int:
    """Analytic parameter count of encoder block 1..5."""
    blocks = spec.encoder_blocks()
    if not (1 <= block <= len(blocks)):
        raise ValueError(f"block must be in [1, {len(blocks)}], got {block}")
    cin = 3
    for i, group in enumerate(blocks, start=1):
        if i == block:
            total = 0
            for layer in group:
                total += layer_param_count(layer, cin, force_dense=force_dense)
                cin = layer.out_channels
            return total
        for layer in group:
            cin = layer.out_channels
    raise AssertionError("unreachable")
