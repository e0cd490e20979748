"""Log-domain depth discretization and the expected-bin soft readout.

Depth x in [alpha, beta] maps to bin b = round((log10(x) - log10(alpha)) / q)
with q = (log10(beta) - log10(alpha)) / K, so bins are uniform in log10 and
indices run 0..K inclusive. Rounding is half-away-from-zero so independent
implementations agree bit-for-bit on tie inputs. Out-of-range depths are
clamped into [alpha, beta] before quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .depthmap import DepthMap, QuantizedDepthMap


@dataclass(frozen=True)
class QuantizationScheme:
    """Log-domain binning over the depth interval [alpha, beta] with K bins."""

    alpha: float          # meters, > 0
    beta: float           # meters, > alpha
    num_bins: int         # K >= 1
    bin_width: float = field(init=False)  # q, log10 units

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be finite and > 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > self.alpha):
            raise ValueError(f"beta must be finite and > alpha, got {self.beta}")
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be >= 1, got {self.num_bins}")
        q = (math.log10(self.beta) - math.log10(self.alpha)) / self.num_bins
        object.__setattr__(self, "bin_width", q)

    def to_dict(self) -> dict:
        return {"alpha_m": self.alpha, "beta_m": self.beta, "num_bins": self.num_bins}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizationScheme":
        return cls(alpha=float(d["alpha_m"]), beta=float(d["beta_m"]), num_bins=int(d["num_bins"]))


# Depth-range defaults; spans typical indoor sensors (low) and street-level
# lidar (high). Fully configurable, these are only starting points.
LOW_RANGE_SCHEME = QuantizationScheme(alpha=0.25, beta=10.0, num_bins=80)
HIGH_RANGE_SCHEME = QuantizationScheme(alpha=1.0, beta=90.0, num_bins=80)
# Mixed-range scheme for the coarse routing network; spans both defaults.
COARSE_RANGE_SCHEME = QuantizationScheme(alpha=0.25, beta=90.0, num_bins=80)


def _round_half_away(v):
    """Round half away from zero (inputs here are nonnegative after clamping)."""
    return np.floor(v + 0.5)


def quantize(x: float, scheme: QuantizationScheme) -> int:
    """Map a metric depth to its bin index in [0, K]."""
    if not (isinstance(x, (int, float)) and math.isfinite(x)):
        raise ValueError(f"depth must be a finite number, got {x!r}")
    if x <= 0:
        raise ValueError(f"depth must be > 0, got {x}")
    x = min(max(float(x), scheme.alpha), scheme.beta)
    v = (math.log10(x) - math.log10(scheme.alpha)) / scheme.bin_width
    b = int(_round_half_away(v))
    return min(max(b, 0), scheme.num_bins)


def dequantize(b, scheme: QuantizationScheme):
    """Invert quantization at the log-domain center of bin b.

    b may be fractional (expected-bin readouts dequantize the same way) and
    may be a numpy array; scalars return float, arrays return float arrays.
    """
    arr = np.asarray(b, dtype=np.float64)
    if arr.size and (float(arr.min()) < 0 or float(arr.max()) > scheme.num_bins):
        raise ValueError(
            f"bin value outside [0, {scheme.num_bins}]: "
            f"range [{arr.min()}, {arr.max()}]"
        )
    out = scheme.alpha * np.power(10.0, arr * scheme.bin_width)
    if np.isscalar(b) or arr.ndim == 0:
        return float(out)
    return out


def quantize_map(d: DepthMap, scheme: QuantizationScheme) -> QuantizedDepthMap:
    """Quantize every valid pixel of a depth map; the mask passes through."""
    values = d.values.astype(np.float64)
    clamped = np.clip(values, scheme.alpha, scheme.beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = (np.log10(clamped) - math.log10(scheme.alpha)) / scheme.bin_width
    bins = np.zeros(d.values.shape, dtype=np.int32)
    if d.valid.any():
        rounded = _round_half_away(v[d.valid])
        bins[d.valid] = np.clip(rounded, 0, scheme.num_bins).astype(np.int32)
    return QuantizedDepthMap(bins=bins, valid=d.valid.copy(), num_bins=scheme.num_bins)


def expected_bin(p: np.ndarray) -> float:
    """Probability-weighted mean bin index of a distribution over bins 0..K.

    The distribution must be nonnegative and sum to 1 within 1e-5.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"expected a 1D distribution, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError("bin probabilities must be nonnegative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-5:
        raise ValueError(f"bin probabilities must sum to 1 within 1e-5, got {total}")
    return float(np.dot(np.arange(p.size, dtype=np.float64), p))
