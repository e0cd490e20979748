"""Core raster types: metric depth maps with validity masks, and RGB images.

DepthMap is the common currency for ground truth and predictions. Valid
pixels hold finite, positive depths in meters; invalid pixels carry no
information (they serialize as 0 in the 16-bit PNG container).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DepthMap:
    """2D raster of metric depths plus a per-pixel validity mask."""

    values: np.ndarray  # (H, W) float32 (float64 inputs are preserved), meters
    valid: np.ndarray   # (H, W) bool

    def __post_init__(self):
        values = np.asarray(self.values)
        dtype = np.float64 if values.dtype == np.float64 else np.float32
        values = values.astype(dtype, copy=False)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2:
            raise ValueError(f"depth values must be 2D, got shape {values.shape}")
        if valid.shape != values.shape:
            raise ValueError(
                f"mask shape {valid.shape} does not match values shape {values.shape}"
            )
        masked = values[valid]
        if masked.size and (not np.all(np.isfinite(masked)) or not np.all(masked > 0)):
            raise ValueError("valid depth pixels must be finite and > 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    @classmethod
    def from_values(cls, values: np.ndarray, valid: np.ndarray | None = None) -> "DepthMap":
        """Build a map, defaulting the mask to finite-and-positive pixels."""
        values = np.asarray(values, dtype=np.float32)
        if valid is None:
            valid = np.isfinite(values) & (values > 0)
        return cls(values=values, valid=np.asarray(valid, dtype=bool))

    def max_depth(self) -> float:
        """Maximum depth over valid pixels."""
        if not self.valid.any():
            raise ValueError("depth map has no valid pixels")
        return float(self.values[self.valid].max())


@dataclass(frozen=True)
class RgbImage:
    """RGB raster with channel-last float values normalized to [0, 1]."""

    values: np.ndarray  # (H, W, 3) float32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 3 or values.shape[2] != 3:
            raise ValueError(f"RGB values must be (H, W, 3), got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("RGB image must be non-empty")
        if values.size and (float(values.min()) < 0.0 or float(values.max()) > 1.0):
            raise ValueError("RGB values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class QuantizedDepthMap:
    """Per-pixel integer bin raster in [0, K] with a validity mask."""

    bins: np.ndarray    # (H, W) int32
    valid: np.ndarray   # (H, W) bool
    num_bins: int = field(default=0)  # K; valid bins lie in [0, K]

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.int32)
        valid = np.asarray(self.valid, dtype=bool)
        if bins.ndim != 2 or valid.shape != bins.shape:
            raise ValueError("bin raster and mask must be matching 2D arrays")
        masked = bins[valid]
        if masked.size and (masked.min() < 0 or masked.max() > self.num_bins):
            raise ValueError(f"valid bin values must lie in [0, {self.num_bins}]")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.bins.shape[0]

    @property
    def width(self) -> int:
        return self.bins.shape[1]
