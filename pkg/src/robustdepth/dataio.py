"""Raster I/O, geometric preprocessing, and dataset manifests.

Depth travels in 16-bit single-channel PNGs holding depth * scale (default
scale 256), raw 0 marking invalid pixels. RGB travels in 8-bit PNGs. A
dataset manifest is a tab-separated text file with one sample per line:
id, rgb_path, depth_path, range_tag, dataset.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .depthmap import DepthMap, RgbImage
from .errors import DataError

DEPTH_PNG_SCALE = 256.0


@dataclass(frozen=True)
class SampleRecord:
    """One manifest row; paths are stored resolved."""

    image_id: str
    rgb_path: str
    depth_path: str
    range_tag: str   # "low" | "high"
    dataset: str


@dataclass(frozen=True)
class PadOffsets:
    """Bookkeeping for zero-padding so outputs can be cropped back."""

    top: int
    left: int
    src_height: int
    src_width: int


def read_depth_png16(path: str, scale: float = DEPTH_PNG_SCALE) -> DepthMap:
    """Read a 16-bit single-channel PNG as depth = raw / scale meters."""
    try:
        img = Image.open(path)
    except OSError as e:
        raise DataError(f"cannot read depth PNG {path}: {e}") from e
    if img.mode not in ("I", "I;16", "I;16B"):
        raise DataError(
            f"{path}: expected 16-bit single-channel PNG, got mode {img.mode!r}"
        )
    raw = np.asarray(img, dtype=np.uint32)
    if raw.ndim != 2:
        raise DataError(f"{path}: depth PNG must be single-channel")
    valid = raw > 0
    values = raw.astype(np.float32) / float(scale)
    values[~valid] = 0.0
    return DepthMap(values=values, valid=valid)


def write_depth_png16(d: DepthMap, path: str, scale: float = DEPTH_PNG_SCALE) -> None:
    """Write depth as round(depth * scale) into a 16-bit PNG; invalid -> 0."""
    scaled = d.values.astype(np.float64) * float(scale)
    raw = np.floor(scaled + 0.5)
    raw[~d.valid] = 0
    max_raw = float(raw.max()) if raw.size else 0.0
    if max_raw > 65535:
        max_depth = float(d.values[d.valid].max())
        raise ValueError(
            f"depth {max_depth:.3f} m overflows 16-bit container at scale {scale} "
            f"(max representable {65535 / scale:.3f} m)"
        )
    Image.fromarray(raw.astype(np.uint16)).save(path)


def read_rgb_png(path: str) -> RgbImage:
    """Read an 8-bit RGB PNG, normalizing values into [0, 1]."""
    try:
        img = Image.open(path).convert("RGB")
    except OSError as e:
        raise DataError(f"cannot read RGB image {path}: {e}") from e
    values = np.asarray(img, dtype=np.float32) / 255.0
    return RgbImage(values=values)


def write_rgb_png(img: RgbImage, path: str) -> None:
    raw = np.floor(img.values.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(raw, mode="RGB").save(path)


def _nearest_indices(src_size: int, dst_size: int) -> np.ndarray:
    # Pixel-center mapping: dst pixel i samples src pixel floor((i+0.5)*s).
    scale = src_size / dst_size
    idx = np.floor((np.arange(dst_size) + 0.5) * scale).astype(np.int64)
    return np.clip(idx, 0, src_size - 1)


def resize_rgb_bilinear(img: RgbImage, width: int, height: int) -> RgbImage:
    """Bilinear resize of an RGB image to width x height."""
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    if width == img.width and height == img.height:
        return RgbImage(values=img.values.copy())
    pil = Image.fromarray(
        np.floor(img.values.astype(np.float64) * 255.0 + 0.5).astype(np.uint8), mode="RGB"
    )
    out = pil.resize((width, height), resample=Image.BILINEAR)
    return RgbImage(values=np.asarray(out, dtype=np.float32) / 255.0)


def resize_depth_nearest(d: DepthMap, width: int, height: int) -> DepthMap:
    """Nearest-valid resize of a depth map.

    Each target pixel copies its nearest source pixel, mask included, so no
    depth is ever interpolated across a valid/invalid boundary.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    if width == d.width and height == d.height:
        return DepthMap(values=d.values.copy(), valid=d.valid.copy())
    rows = _nearest_indices(d.height, height)
    cols = _nearest_indices(d.width, width)
    values = d.values[np.ix_(rows, cols)]
    valid = d.valid[np.ix_(rows, cols)]
    return DepthMap(values=values, valid=valid)


def zero_pad(obj, target_width: int, target_height: int):
    """Zero-pad an RgbImage or DepthMap to target size, padding top and right.

    The source lands at the bottom-left of the target (street-capture
    convention). Returns (padded, PadOffsets); crop_back inverts it.
    """
    h, w = obj.height, obj.width
    if h > target_height or w > target_width:
        raise ValueError(
            f"source {w}x{h} does not fit inside target {target_width}x{target_height}"
        )
    top = target_height - h
    offsets = PadOffsets(top=top, left=0, src_height=h, src_width=w)
    if isinstance(obj, RgbImage):
        padded = np.zeros((target_height, target_width, 3), dtype=np.float32)
        padded[top:top + h, :w] = obj.values
        return RgbImage(values=padded), offsets
    if isinstance(obj, DepthMap):
        values = np.zeros((target_height, target_width), dtype=np.float32)
        valid = np.zeros((target_height, target_width), dtype=bool)
        values[top:top + h, :w] = obj.values
        valid[top:top + h, :w] = obj.valid
        return DepthMap(values=values, valid=valid), offsets
    raise TypeError(f"cannot pad object of type {type(obj).__name__}")


def crop_back(obj, offsets: PadOffsets):
    """Undo zero_pad, recovering the source region."""
    t, l = offsets.top, offsets.left
    h, w = offsets.src_height, offsets.src_width
    if isinstance(obj, RgbImage):
        return RgbImage(values=obj.values[t:t + h, l:l + w].copy())
    if isinstance(obj, DepthMap):
        return DepthMap(
            values=obj.values[t:t + h, l:l + w].copy(),
            valid=obj.valid[t:t + h, l:l + w].copy(),
        )
    raise TypeError(f"cannot crop object of type {type(obj).__name__}")


def random_crop(
    img: RgbImage,
    depth: DepthMap,
    width: int,
    height: int,
    rng: np.random.Generator,
) -> tuple[RgbImage, DepthMap]:
    """Aligned random crop of an RGB/depth pair; deterministic given rng."""
    if img.height != depth.height or img.width != depth.width:
        raise ValueError("RGB and depth must share geometry for aligned cropping")
    if img.height < height or img.width < width:
        raise ValueError(
            f"source {img.width}x{img.height} too small for {width}x{height} crop"
        )
    top = int(rng.integers(0, img.height - height + 1))
    left = int(rng.integers(0, img.width - width + 1))
    cimg = RgbImage(values=img.values[top:top + height, left:left + width].copy())
    cdep = DepthMap(
        values=depth.values[top:top + height, left:left + width].copy(),
        valid=depth.valid[top:top + height, left:left + width].copy(),
    )
    return cimg, cdep


def read_manifest(path: str) -> list[SampleRecord]:
    """Load a manifest, resolving paths relative to the manifest location."""
    if not os.path.isfile(path):
        raise DataError(f"manifest not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(
                    f"{path}:{lineno}: expected 5 tab-separated fields, got {len(parts)}"
                )
            image_id, rgb_path, depth_path, range_tag, dataset = parts
            if range_tag not in ("low", "high"):
                raise DataError(
                    f"{path}:{lineno}: range_tag must be 'low' or 'high', got {range_tag!r}"
                )
            rgb_abs = rgb_path if os.path.isabs(rgb_path) else os.path.join(base, rgb_path)
            depth_abs = depth_path if os.path.isabs(depth_path) else os.path.join(base, depth_path)
            for p in (rgb_abs, depth_abs):
                if not os.path.isfile(p):
                    raise DataError(f"{path}:{lineno}: file not found: {p}")
            records.append(
                SampleRecord(
                    image_id=image_id,
                    rgb_path=rgb_abs,
                    depth_path=depth_abs,
                    range_tag=range_tag,
                    dataset=dataset,
                )
            )
    return records


def write_manifest(records: list[SampleRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(
                f"{r.image_id}\t{r.rgb_path}\t{r.depth_path}\t{r.range_tag}\t{r.dataset}\n"
            )


def load_sample(record: SampleRecord, scale: float = DEPTH_PNG_SCALE):
    """Load the RGB/depth pair for one manifest record."""
    return read_rgb_png(record.rgb_path), read_depth_png16(record.depth_path, scale=scale)
