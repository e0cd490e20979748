"""Checkpoint archive: a zip holding the network description as structured
text, named weight tensors, the model's quantization scheme, and (for
resumable training checkpoints) optimizer moments and RNG states.

The format is versioned by the magic string "DSSIDE1". Training state
round-trips exactly: weights, Adam moments, and both RNG streams restore
bit-for-bit, so a resumed run continues with identical arithmetic.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError
from .network.model import DepthNet, build_model
from .network.spec import NetworkSpec
from .quantize import QuantizationScheme

MAGIC = "DSSIDE1"


@dataclass
class TrainState:
    """Everything beyond the weights needed to resume training exactly."""

    step: int
    np_rng_state: dict
    torch_rng_state: np.ndarray          # uint8
    optimizer_arrays: dict[str, np.ndarray]
    optimizer_meta: dict
    best_val_rel: float | None = None
    best_step: int | None = None


@dataclass
class LoadedCheckpoint:
    model: DepthNet
    scheme: QuantizationScheme
    role: str
    train_state: TrainState | None


def capture_optimizer(optimizer: torch.optim.Optimizer) -> tuple[dict, dict]:
    """Split an optimizer state dict into named arrays plus JSON-able meta."""
    sd = optimizer.state_dict()
    arrays: dict[str, np.ndarray] = {}
    scalars: dict[str, float | int | bool] = {}
    for idx, state in sd["state"].items():
        for key, value in state.items():
            if torch.is_tensor(value):
                arrays[f"{idx}.{key}"] = value.detach().cpu().numpy()
            else:
                scalars[f"{idx}.{key}"] = value
    meta = {"param_groups": sd["param_groups"], "scalars": scalars}
    return arrays, meta


def restore_optimizer(optimizer: torch.optim.Optimizer, arrays: dict, meta: dict) -> None:
    state: dict[int, dict] = {}
    for compound, arr in arrays.items():
        idx, key = compound.split(".", 1)
        state.setdefault(int(idx), {})[key] = torch.from_numpy(np.array(arr))
    for compound, value in meta.get("scalars", {}).items():
        idx, key = compound.split(".", 1)
        state.setdefault(int(idx), {})[key] = value
    optimizer.load_state_dict({"state": state, "param_groups": meta["param_groups"]})


def _npz_bytes(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    return buf.getvalue()


def _npz_load(data: bytes) -> dict[str, np.ndarray]:
    with np.load(io.BytesIO(data), allow_pickle=False) as z:
        return {k: z[k] for k in z.files}


def save_checkpoint(
    path: str,
    model: DepthNet,
    scheme: QuantizationScheme,
    role: str,
    train_state: TrainState | None = None,
) -> None:
    weights = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("magic.txt", MAGIC)
        zf.writestr("spec.json", json.dumps(model.spec.to_dict(), indent=2))
        zf.writestr("scheme.json", json.dumps({"role": role, **scheme.to_dict()}, indent=2))
        zf.writestr("weights.npz", _npz_bytes(weights))
        if train_state is not None:
            zf.writestr("optimizer.npz", _npz_bytes(train_state.optimizer_arrays))
            zf.writestr(
                "train_state.json",
                json.dumps({
                    "step": train_state.step,
                    "np_rng_state": train_state.np_rng_state,
                    "optimizer_meta": train_state.optimizer_meta,
                    "best_val_rel": train_state.best_val_rel,
                    "best_step": train_state.best_step,
                }),
            )
            zf.writestr("torch_rng.npz", _npz_bytes({"state": train_state.torch_rng_state}))


def load_checkpoint(path: str) -> LoadedCheckpoint:
    try:
        zf = zipfile.ZipFile(path, "r")
    except (OSError, zipfile.BadZipFile) as e:
        raise DataError(f"cannot open checkpoint {path}: {e}") from e
    with zf:
        names = set(zf.namelist())
        if "magic.txt" not in names:
            raise DataError(f"{path}: not a depth checkpoint (missing magic)")
        magic = zf.read("magic.txt").decode("utf-8").strip()
        if magic != MAGIC:
            raise DataError(f"{path}: unsupported checkpoint format {magic!r}")
        spec = NetworkSpec.from_dict(json.loads(zf.read("spec.json")))
        scheme_d = json.loads(zf.read("scheme.json"))
        scheme = QuantizationScheme.from_dict(scheme_d)
        role = scheme_d.get("role", "low")

        model = build_model(spec, seed=0)
        weights = _npz_load(zf.read("weights.npz"))
        state = {k: torch.from_numpy(np.array(v)) for k, v in weights.items()}
        model.load_state_dict(state, strict=True)
        model.eval()

        train_state = None
        if "train_state.json" in names:
            ts = json.loads(zf.read("train_state.json"))
            train_state = TrainState(
                step=int(ts["step"]),
                np_rng_state=ts["np_rng_state"],
                torch_rng_state=_npz_load(zf.read("torch_rng.npz"))["state"],
                optimizer_arrays=_npz_load(zf.read("optimizer.npz")),
                optimizer_meta=ts["optimizer_meta"],
                best_val_rel=ts.get("best_val_rel"),
                best_step=ts.get("best_step"),
            )
    return LoadedCheckpoint(model=model, scheme=scheme, role=role, train_state=train_state)
