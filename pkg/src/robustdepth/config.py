"""Pipeline configuration: an INI file with sections for the network,
quantization schemes per depth range, loss, router, and training settings.

Every key has a default, so an empty (or absent) file yields a runnable
configuration. Unknown sections or keys are rejected to catch typos.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .losses import LOSS_MODES, REDUCTIONS, LossConfig
from .quantize import (
    COARSE_RANGE_SCHEME,
    HIGH_RANGE_SCHEME,
    LOW_RANGE_SCHEME,
    QuantizationScheme,
)
from .network.spec import NetworkSpec

ROUTER_METHODS = (
    "scene_classification", "coarse_depth", "forced_low", "forced_high", "cde_only",
)
ROLES = ("low", "high", "coarse")

_KNOWN_KEYS = {
    "network": {"width_mult", "sam_position", "skip_encoding", "skip_rgb"},
    "quantization.low": {"alpha_m", "beta_m", "num_bins"},
    "quantization.high": {"alpha_m", "beta_m", "num_bins"},
    "quantization.coarse": {"alpha_m", "beta_m", "num_bins"},
    "loss": {"mode", "w1", "w2", "reduction"},
    "router": {"method", "sigma", "top_k", "scene_table", "scene_probs"},
    "train": {"steps", "batch_size", "learning_rate", "seed", "val_every", "role",
              "threads", "target_val_rel"},
    "paths": {"ckpt_low", "ckpt_high", "ckpt_coarse"},
}


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 2000
    batch_size: int = 4
    learning_rate: float = 1e-3
    seed: int = 0
    val_every: int = 200
    role: str = "low"    # low | high | coarse: picks architecture and scheme
    threads: int = 1     # desk-scale tensors are overhead-bound; 1 is fastest
    target_val_rel: float | None = None   # stop early once validation REL dips below

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"train role must be one of {ROLES}, got {self.role!r}")
        if self.steps < 1 or self.batch_size < 1 or self.val_every < 1:
            raise ConfigError("steps, batch_size, and val_every must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    schemes: dict = field(default_factory=lambda: {
        "low": LOW_RANGE_SCHEME, "high": HIGH_RANGE_SCHEME, "coarse": COARSE_RANGE_SCHEME,
    })
    loss: LossConfig = field(default_factory=LossConfig)
    router_method: str = "coarse_depth"
    sigma: float = 5.89
    top_k: int = 15
    scene_table_path: str | None = None
    scene_probs_path: str | None = None
    width_mult: float = 1.0
    # "default" = variant's table default, None = no SAM, or block 3/4/5.
    sam_position: int | str | None = "default"
    skip_encoding: bool = True
    skip_rgb: bool = True
    train: TrainSettings = field(default_factory=TrainSettings)
    ckpt_paths: dict = field(default_factory=dict)   # role -> checkpoint path

    def __post_init__(self):
        if self.router_method not in ROUTER_METHODS:
            raise ConfigError(
                f"router method must be one of {ROUTER_METHODS}, got {self.router_method!r}"
            )
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if not (0.0 < self.width_mult <= 1.0):
            raise ConfigError(f"width_mult must be in (0, 1], got {self.width_mult}")
        if self.sam_position not in ("default", None, 3, 4, 5):
            raise ConfigError(
                f"sam_position must be 'default', 'none', 3, 4, or 5, "
                f"got {self.sam_position!r}"
            )

    def scheme_for_role(self, role: str) -> QuantizationScheme:
        if role not in ROLES:
            raise ConfigError(f"unknown role {role!r}")
        return self.schemes[role]

    def network_spec_for_role(self, role: str) -> NetworkSpec:
        """Architecture for a role: the coarse network reuses the low
        depth-range architecture (trained on mixed-range data)."""
        variant = "high" if role == "high" else "low"
        kwargs = {"skip_encoding": self.skip_encoding, "skip_rgb": self.skip_rgb}
        if self.sam_position != "default":
            kwargs["sam_position"] = self.sam_position
        return NetworkSpec.default_for(
            variant, num_bins=self.scheme_for_role(role).num_bins,
            width_multiplier=self.width_mult, **kwargs,
        )

    def with_overrides(self, sigma=None, top_k=None, router=None, seed=None,
                       width_mult=None) -> "PipelineConfig":
        cfg = self
        if sigma is not None:
            cfg = replace(cfg, sigma=float(sigma))
        if top_k is not None:
            cfg = replace(cfg, top_k=int(top_k))
        if router is not None:
            cfg = replace(cfg, router_method=router)
        if width_mult is not None:
            cfg = replace(cfg, width_mult=float(width_mult))
        if seed is not None:
            cfg = replace(cfg, train=replace(cfg.train, seed=int(seed)))
        return cfg


def _get(parser, section, key, fallback):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return fallback


def _parse_scheme(parser, section, default: QuantizationScheme) -> QuantizationScheme:
    try:
        return QuantizationScheme(
            alpha=float(_get(parser, section, "alpha_m", default.alpha)),
            beta=float(_get(parser, section, "beta_m", default.beta)),
            num_bins=int(_get(parser, section, "num_bins", default.num_bins)),
        )
    except ValueError as e:
        raise ConfigError(f"[{section}]: {e}") from e


def load_config(path: str | None) -> PipelineConfig:
    """Load a config file; None or a missing optional path yields defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from e

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser.options(section):
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    schemes = {
        "low": _parse_scheme(parser, "quantization.low", LOW_RANGE_SCHEME),
        "high": _parse_scheme(parser, "quantization.high", HIGH_RANGE_SCHEME),
        "coarse": _parse_scheme(parser, "quantization.coarse", COARSE_RANGE_SCHEME),
    }

    try:
        loss = LossConfig(
            mode=_get(parser, "loss", "mode", "soft_cls_plus_reg"),
            w1=float(_get(parser, "loss", "w1", 1.0)),
            w2=float(_get(parser, "loss", "w2", 1.0)),
            reduction=_get(parser, "loss", "reduction", "mean_over_valid"),
        )
    except ValueError as e:
        raise ConfigError(f"[loss]: {e}") from e
    if loss.mode not in LOSS_MODES or loss.reduction not in REDUCTIONS:
        raise ConfigError(f"[loss]: invalid mode or reduction")

    sam_raw = str(_get(parser, "network", "sam_position", "default")).strip().lower()
    if sam_raw in ("", "default"):
        sam_position = "default"
    elif sam_raw == "none":
        sam_position = None
    else:
        try:
            sam_position = int(sam_raw)
        except ValueError as e:
            raise ConfigError(f"[network] sam_position: {e}") from e

    def _bool(section, key, fallback):
        if parser.has_option(section, key):
            try:
                return parser.getboolean(section, key)
            except ValueError as e:
                raise ConfigError(f"[{section}] {key}: {e}") from e
        return fallback

    train = TrainSettings(
        steps=int(_get(parser, "train", "steps", 2000)),
        batch_size=int(_get(parser, "train", "batch_size", 4)),
        learning_rate=float(_get(parser, "train", "learning_rate", 1e-3)),
        seed=int(_get(parser, "train", "seed", 0)),
        val_every=int(_get(parser, "train", "val_every", 200)),
        role=_get(parser, "train", "role", "low"),
        threads=int(_get(parser, "train", "threads", 1)),
        target_val_rel=(
            float(_get(parser, "train", "target_val_rel", 0))
            if parser.has_option("train", "target_val_rel") else None
        ),
    )

    ckpt_paths = {}
    for role in ROLES:
        p = _get(parser, "paths", f"ckpt_{role}", "")
        if p:
            ckpt_paths[role] = p

    scene_table = _get(parser, "router", "scene_table", "") or None
    scene_probs = _get(parser, "router", "scene_probs", "") or None

    try:
        return PipelineConfig(
            schemes=schemes,
            loss=loss,
            router_method=_get(parser, "router", "method", "coarse_depth"),
            sigma=float(_get(parser, "router", "sigma", 5.89)),
            top_k=int(_get(parser, "router", "top_k", 15)),
            scene_table_path=scene_table,
            scene_probs_path=scene_probs,
            width_mult=float(_get(parser, "network", "width_mult", 1.0)),
            sam_position=sam_position,
            skip_encoding=_bool("network", "skip_encoding", True),
            skip_rgb=_bool("network", "skip_rgb", True),
            train=train,
            ckpt_paths=ckpt_paths,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
