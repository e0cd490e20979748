"""Depth-range routing: scene-category voting and coarse-depth thresholding.

An input is routed to the "low" depth-range network (everything close to
the camera) or the "high" one (far objects present) either by majority
voting over the tags of the top-k most probable scene categories, or by
comparing the maximum of a coarse depth estimate against a threshold sigma.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .depthmap import DepthMap
from .errors import DataError

DEFAULT_SIGMA = 5.89   # meters; fixed from validation statistics upstream
DEFAULT_TOP_K = 15

_DEFAULT_TABLE = os.path.join(os.path.dirname(__file__), "data", "scene_depth_ranges.txt")


@dataclass(frozen=True)
class SceneLabelTable:
    """Ordered scene categories, each tagged with a depth range."""

    names: tuple[str, ...]
    tags: tuple[str, ...]  # "low" | "high", aligned with names

    def __post_init__(self):
        if len(self.names) != len(self.tags) or not self.names:
            raise ValueError("scene table must be non-empty with aligned names and tags")
        seen = set()
        for name in self.names:
            if name in seen:
                raise ValueError(f"duplicate scene category: {name!r}")
            seen.add(name)
        for tag in self.tags:
            if tag not in ("low", "high"):
                raise ValueError(f"depth-range tag must be 'low' or 'high', got {tag!r}")

    def __len__(self) -> int:
        return len(self.names)

    def indices_by_tag(self, tag: str) -> list[int]:
        return [i for i, t in enumerate(self.tags) if t == tag]


@dataclass(frozen=True)
class VoteEvidence:
    low_votes: int
    high_votes: int
    k: int


@dataclass(frozen=True)
class CoarseDepthEvidence:
    d_max: float   # meters
    sigma: float   # meters


@dataclass(frozen=True)
class RoutingDecision:
    range: str                                      # "low" | "high"
    method: str                                     # see ROUTING_METHODS
    evidence: VoteEvidence | CoarseDepthEvidence | None = None

    def describe(self) -> str:
        if isinstance(self.evidence, VoteEvidence):
            ev = f"low={self.evidence.low_votes} high={self.evidence.high_votes} k={self.evidence.k}"
        elif isinstance(self.evidence, CoarseDepthEvidence):
            ev = f"d_max={self.evidence.d_max:.3f} sigma={self.evidence.sigma:.3f}"
        else:
            ev = "-"
        return f"{self.range} ({self.method}; {ev})"


ROUTING_METHODS = ("scene_classification", "coarse_depth", "forced", "cde_only")


def validate_scene_probabilities(p: np.ndarray, table: SceneLabelTable) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size != len(table):
        raise ValueError(
            f"probability vector length {p.size} does not match table size {len(table)}"
        )
    if np.any(p < 0):
        raise ValueError("scene probabilities must be nonnegative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-4:
        raise ValueError(f"scene probabilities must sum to 1 within 1e-4, got {total}")
    return p


def route_by_scene(
    p: np.ndarray, table: SceneLabelTable, k: int = DEFAULT_TOP_K
) -> RoutingDecision:
    """Majority vote over the depth-range tags of the top-k scene categories.

    Ties in probability break by table order; low wins only with strictly
    more than k/2 low votes (exact ties on even k go to high).
    """
    if k < 1 or k > len(table):
        raise ValueError(f"k must be in [1, {len(table)}], got {k}")
    p = validate_scene_probabilities(p, table)
    # Stable sort on descending probability keeps table order on ties.
    order = np.argsort(-p, kind="stable")[:k]
    low_votes = sum(1 for i in order if table.tags[i] == "low")
    high_votes = k - low_votes
    decided = "low" if low_votes > k / 2 else "high"
    return RoutingDecision(
        range=decided,
        method="scene_classification",
        evidence=VoteEvidence(low_votes=low_votes, high_votes=high_votes, k=k),
    )


def route_by_coarse_depth(coarse: DepthMap, sigma: float = DEFAULT_SIGMA) -> RoutingDecision:
    """Threshold the maximum of a coarse depth estimate: d_max > sigma -> high."""
    if not coarse.valid.any():
        raise ValueError("coarse depth map has no valid pixels to route on")
    d_max = coarse.max_depth()
    decided = "high" if d_max > sigma else "low"
    return RoutingDecision(
        range=decided,
        method="coarse_depth",
        evidence=CoarseDepthEvidence(d_max=d_max, sigma=float(sigma)),
    )


def forced_decision(range_tag: str) -> RoutingDecision:
    if range_tag not in ("low", "high"):
        raise ValueError(f"forced range must be 'low' or 'high', got {range_tag!r}")
    return RoutingDecision(range=range_tag, method="forced", evidence=None)


def load_scene_table(path: str) -> SceneLabelTable:
    """Parse a scene table file: one "category_name,low|high" per line,
    '#' comments allowed."""
    if not os.path.isfile(path):
        raise DataError(f"scene table not found: {path}")
    names, tags = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(
                    f"{path}:{lineno}: expected 'category_name,low|high', got {line!r}"
                )
            name, tag = parts[0].strip(), parts[1].strip()
            if tag not in ("low", "high"):
                raise DataError(f"{path}:{lineno}: tag must be 'low' or 'high', got {tag!r}")
            if name in names:
                raise DataError(f"{path}:{lineno}: duplicate scene category {name!r}")
            names.append(name)
            tags.append(tag)
    if not names:
        raise DataError(f"{path}: scene table is empty")
    return SceneLabelTable(names=tuple(names), tags=tuple(tags))


def load_default_scene_table() -> SceneLabelTable:
    """Bundled 365-category table with heuristic indoor->low / outdoor->high
    tags; a stand-in meant to be overridden with a curated table."""
    return load_scene_table(_DEFAULT_TABLE)


def read_probability_file(path: str, table: SceneLabelTable) -> dict[str, np.ndarray]:
    """Read per-image scene probabilities: one line per image, id followed by
    whitespace-separated probabilities in table order."""
    if not os.path.isfile(path):
        raise DataError(f"scene probability file not found: {path}")
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != len(table) + 1:
                raise DataError(
                    f"{path}:{lineno}: expected id + {len(table)} probabilities, "
                    f"got {len(parts) - 1}"
                )
            try:
                p = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: unparseable probability: {e}") from e
            out[parts[0]] = validate_scene_probabilities(p, table)
    return out


def write_probability_file(probs: dict[str, np.ndarray], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for image_id, p in probs.items():
            f.write(image_id + " " + " ".join(f"{v:.8e}" for v in p) + "\n")
