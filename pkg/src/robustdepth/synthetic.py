"""Procedural RGB/depth scene generator for desk-scale training.

Scenes are a log-depth background gradient (far at the top of the frame)
with a handful of fronto-parallel rectangles occluding it. Color is a fixed
deterministic function of depth plus light textured noise, so depth is
learnable from RGB alone, and the color code is shared across depth ranges
so mixed-range training is unambiguous. Every generated pixel is valid.
"""

from __future__ import annotations

import os

import numpy as np

from .dataio import SampleRecord, write_depth_png16, write_rgb_png, write_manifest
from .depthmap import DepthMap, RgbImage

# Depth intervals sampled per range tag.
RANGE_DEPTHS = {"low": (0.5, 8.0), "high": (2.0, 80.0)}

# Global color-code reference span (log-depth normalization), shared by both
# ranges so one color always means one depth.
_COLOR_REF_LO = 0.25
_COLOR_REF_HI = 90.0


def _depth_to_rgb(depth: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = (np.log(depth) - np.log(_COLOR_REF_LO)) / (
        np.log(_COLOR_REF_HI) - np.log(_COLOR_REF_LO)
    )
    u = np.clip(u, 0.0, 1.0)
    base = np.stack(
        [u, 1.0 - u, 0.5 + 0.3 * np.sin(4.0 * np.pi * u)], axis=-1
    )
    noise = rng.uniform(-0.02, 0.02, size=base.shape)
    return np.clip(base + noise, 0.0, 1.0).astype(np.float32)


def generate_synthetic_scene(
    range_tag: str,
    width: int,
    height: int,
    seed: int,
    max_depth: float | None = None,
    num_rects: int | None = None,
) -> tuple[RgbImage, DepthMap]:
    """Generate one scene; a pure function of its arguments.

    max_depth caps (and pins) the scene's deepest pixel, letting routing
    fixtures be constructed on either side of a depth threshold.
    """
    if range_tag not in RANGE_DEPTHS:
        raise ValueError(f"range_tag must be 'low' or 'high', got {range_tag!r}")
    if width % 32 != 0 or height % 32 != 0:
        raise ValueError(f"scene size must be divisible by 32, got {width}x{height}")
    near, far_default = RANGE_DEPTHS[range_tag]
    far = float(max_depth) if max_depth is not None else far_default
    if far <= near:
        raise ValueError(f"max_depth must exceed {near}, got {far}")

    rng = np.random.default_rng(seed)

    # Background: log-depth gradient, far at row 0 down to near at the bottom.
    row_depths = np.exp(np.linspace(np.log(far), np.log(near), height))
    depth = np.tile(row_depths[:, None], (1, width))

    k = int(num_rects) if num_rects is not None else int(rng.integers(3, 7))
    top_clear = max(1, height // 6)  # keep the deepest rows unoccluded
    for _ in range(k):
        rh = int(rng.integers(max(2, height // 8), max(3, height // 2)))
        rw = int(rng.integers(max(2, width // 8), max(3, width // 2)))
        rh = min(rh, height - top_clear)
        top = int(rng.integers(top_clear, height - rh + 1))
        left = int(rng.integers(0, width - rw + 1))
        d_r = float(np.exp(rng.uniform(np.log(near), np.log(0.8 * far))))
        region = depth[top:top + rh, left:left + rw]
        np.minimum(region, d_r, out=region)

    depth = np.clip(depth, near, far)
    depth[0, :] = far  # pin the maximum exactly

    rgb = _depth_to_rgb(depth, rng)
    return RgbImage(values=rgb), DepthMap.from_values(depth.astype(np.float32))


def generate_dataset(
    out_dir: str,
    n_low: int,
    n_high: int,
    width: int,
    height: int,
    seed: int,
    max_depth_low: float | None = None,
    max_depth_high: float | None = None,
    manifest_name: str = "manifest.tsv",
) -> str:
    """Write a synthetic dataset (PNGs plus manifest) and return the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    records = []
    specs = [("low", i, max_depth_low) for i in range(n_low)] + [
        ("high", i, max_depth_high) for i in range(n_high)
    ]
    for tag, i, cap in specs:
        scene_seed = seed * 100003 + (0 if tag == "low" else 50000) + i
        rgb, depth = generate_synthetic_scene(
            tag, width, height, seed=scene_seed, max_depth=cap
        )
        image_id = f"{tag}_{i:04d}"
        rgb_path = os.path.join(out_dir, f"{image_id}_rgb.png")
        depth_path = os.path.join(out_dir, f"{image_id}_depth.png")
        write_rgb_png(rgb, rgb_path)
        write_depth_png16(depth, depth_path)
        records.append(
            SampleRecord(
                image_id=image_id,
                rgb_path=os.path.abspath(rgb_path),
                depth_path=os.path.abspath(depth_path),
                range_tag=tag,
                dataset="synthetic",
            )
        )
    manifest_path = os.path.join(out_dir, manifest_name)
    write_manifest(records, manifest_path)
    return manifest_path


def synthetic_scene_probabilities(
    table_size: int,
    low_indices: list[int],
    high_indices: list[int],
    range_tag: str,
    k: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Probability vector whose top-k majority vote lands on range_tag.

    Puts k descending probability spikes on categories of the wanted tag
    (with a minority of the other tag mixed in), the remainder spread
    uniformly. Used to fabricate classifier outputs for routing fixtures.
    """
    majority = low_indices if range_tag == "low" else high_indices
    minority = high_indices if range_tag == "low" else low_indices
    n_major = k // 2 + 1
    n_minor = k - n_major
    if len(majority) < n_major or len(minority) < n_minor:
        raise ValueError("not enough categories of each tag for the requested k")
    chosen = list(rng.choice(majority, size=n_major, replace=False))
    chosen += list(rng.choice(minority, size=n_minor, replace=False))
    rng.shuffle(chosen)
    p = np.full(table_size, 1e-6)
    mass = 0.6
    for rank, idx in enumerate(chosen):
        p[idx] = mass * (0.7 ** rank)
    return p / p.sum()
