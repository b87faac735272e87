"""Checkpoint container.

An uncompressed ``.npz`` archive.  Every parameter is stored under its dotted
name as a little-endian float64 array (``<f8``).  The extra member
``__meta__`` is a UTF-8 JSON document held as a ``uint8`` array::

    {"format": "unimask-checkpoint", "version": 1,
     "model_config": {...}, "topology": {...} | null, "extra": {...}}

Loading never unpickles.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..kinematics import SkeletonTopology
from .network import ModelConfig, UniMaskM

CHECKPOINT_VERSION = 1
_FORMAT = "unimask-checkpoint"
_META = "__meta__"


def save_checkpoint(path, model: UniMaskM, topology: SkeletonTopology | None = None,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {
        "format": _FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "topology": topology.to_dict() if topology is not None else None,
        "extra": extra or {},
    }
    arrays = {k: np.asarray(v, dtype="<f8") for k, v in model.state_dict().items()}
    arrays[_META] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Raw metadata and arrays of a checkpoint file."""
    with np.load(path, allow_pickle=False) as archive:
        arrays = {k: archive[k] for k in archive.files}
    if _META not in arrays:
        raise ValueError(f"{path}: not a checkpoint (no metadata)")
    meta = json.loads(arrays.pop(_META).tobytes().decode("utf-8"))
    if meta.get("format") != _FORMAT:
        raise ValueError(f"{path}: unexpected format {meta.get('format')!r}")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    return meta, arrays


def load_checkpoint(path) -> tuple[UniMaskM, dict]:
    """Rebuild the model stored at ``path``; returns ``(model, metadata)``."""
    meta, arrays = read_checkpoint(path)
    topo = SkeletonTopology.from_dict(meta["topology"]) if meta.get("topology") else None
    model = UniMaskM(ModelConfig.from_dict(meta["model_config"]), topo)
    model.load_state_dict(arrays)
    return model, meta
