"""Checkpoint serialization.

Each module is stored in an "STCK" file: magic, u32 version, length-prefixed
module name, u32 tensor count, then per tensor a length-prefixed name, u32
rank, u32 dims, and f32 little-endian data. A JSON manifest lists the module
files, the training stage and step, and the model configuration.

Optimizer state (needed only to resume training) is stored in a torch-native
sidecar next to the manifest; the STCK files remain the interchange format
for weights.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .nets import ModelConfig

STCK_MAGIC = b"STCK"
STCK_VERSION = 1

STAGES = ("PRETRAIN_ALIGNER", "PRETRAIN_PITCH", "STAGE1", "STAGE2")


class CheckpointError(Exception):
    pass


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def serialize_module(name: str, state_dict: dict) -> bytes:
    out = [STCK_MAGIC, struct.pack("<I", STCK_VERSION), _pack_str(name)]
    tensors = [(k, v) for k, v in state_dict.items()]
    out.append(struct.pack("<I", len(tensors)))
    for key, tensor in tensors:
        arr = tensor.detach().cpu().numpy()
        if not np.issubdtype(arr.dtype, np.floating):
            raise CheckpointError(f"non-float tensor {key!r} cannot be serialized")
        arr = arr.astype("<f4")
        out.append(_pack_str(key))
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes(order="C"))
    return b"".join(out)


def deserialize_module(data: bytes) -> tuple[str, dict]:
    if data[:4] != STCK_MAGIC:
        raise CheckpointError("bad STCK magic")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != STCK_VERSION:
        raise CheckpointError(f"unsupported STCK version {version}")
    offset = 8

    def read_str():
        nonlocal offset
        (n,) = struct.unpack_from("<I", data, offset)
        offset += 4
        s = data[offset : offset + n].decode("utf-8")
        offset += n
        return s

    name = read_str()
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    state = {}
    for _ in range(count):
        key = read_str()
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        numel = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=numel, offset=offset).copy()
        offset += 4 * numel
        state[key] = torch.from_numpy(arr.reshape(dims))
    return name, state


def module_hash(state_dict: dict) -> str:
    return hashlib.sha256(serialize_module("h", state_dict)).hexdigest()


def save_checkpoint(
    directory,
    stage: str,
    step: int,
    modules: dict[str, torch.nn.Module],
    config: ModelConfig,
    optimizer_state: dict | None = None,
    seed: int | None = None,
) -> Path:
    """Write STCK module files + manifest (and optional optimizer sidecar)."""
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage {stage!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, module in modules.items():
        payload = serialize_module(name, module.state_dict())
        fname = f"{name}.stck"
        (directory / fname).write_bytes(payload)
        files[name] = fname
    config_dict = config.to_dict()
    config_hash = hashlib.sha256(
        json.dumps(config_dict, sort_keys=True).encode()
    ).hexdigest()
    manifest = {
        "stage": stage,
        "step": step,
        "modules": files,
        "config": config_dict,
        "config_hash": config_hash,
        "seed": seed,
    }
    if optimizer_state is not None:
        torch.save(optimizer_state, directory / "optim.pt")
        manifest["optimizer"] = "optim.pt"
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise CheckpointError(f"no checkpoint manifest at {path}")
    manifest = json.loads(path.read_text())
    manifest["_dir"] = str(path.parent)
    config_dict = dict(manifest["config"])
    expected = hashlib.sha256(
        json.dumps(config_dict, sort_keys=True).encode()
    ).hexdigest()
    if expected != manifest["config_hash"]:
        raise CheckpointError("config hash mismatch in manifest")
    for fname in manifest["modules"].values():
        if not (path.parent / fname).exists():
            raise CheckpointError(f"missing module file {fname}")
    return manifest


def load_modules(manifest: dict, modules: dict[str, torch.nn.Module]) -> None:
    """Load STCK weights into existing module instances (strict)."""
    directory = Path(manifest["_dir"])
    for name, module in modules.items():
        if name not in manifest["modules"]:
            raise CheckpointError(f"module {name!r} not present in checkpoint")
        stored_name, state = deserialize_module(
            (directory / manifest["modules"][name]).read_bytes()
        )
        if stored_name != name:
            raise CheckpointError(
                f"module file {manifest['modules'][name]} holds {stored_name!r}"
            )
        reference = module.state_dict()
        cast = {k: v.to(reference[k].dtype).reshape(reference[k].shape)
                for k, v in state.items()}
        module.load_state_dict(cast, strict=True)


def load_optimizer_state(manifest: dict):
    if "optimizer" not in manifest:
        return None
    return torch.load(
        Path(manifest["_dir"]) / manifest["optimizer"], weights_only=False
    )
