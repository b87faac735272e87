"""JSON motion files and dataset directories.

A motion file is a single JSON object::

    {"format": "unimask-motion", "version": 1,
     "topology": "default22" | {"name": ..., "names": [...], "parents": [...], "offsets": [...]},
     "frame_rate": 30.0, "repr": "position3", "T": 64, "J": 22, "n": 3,
     "values": [... T*J*n floats, row-major ...],
     "visibility": [[0/1 per joint] per frame] (optional),
     "root_translation": [... T*3 floats ...] (optional)}

Floats are written with ``repr`` so a save/load cycle is bit-exact.  A dataset
directory holds ``train/`` and ``test/`` subdirectories of ``*.json`` files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fileio import atomic_write_text
from .kinematics import REPR_DIMS, MotionTensor, SkeletonTopology, default_topology

FORMAT = "unimask-motion"
VERSION = 1
SPLITS = ("train", "test")


class MotionFileError(ValueError):
    pass


def _topology_field(topology: SkeletonTopology | None):
    if topology is None:
        return None
    if topology.name == "default22" and topology == default_topology():
        return "default22"
    return topology.to_dict()


def resolve_topology(field) -> SkeletonTopology | None:
    if field is None:
        return None
    if isinstance(field, str):
        if field == "default22":
            return default_topology()
        raise MotionFileError(f"unknown topology name {field!r}")
    return SkeletonTopology.from_dict(field)


def motion_to_dict(motion: MotionTensor, topology: SkeletonTopology | None = None) -> dict:
    T, J, n = motion.shape
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "topology": _topology_field(topology),
        "frame_rate": float(motion.frame_rate),
        "repr": motion.repr,
        "T": T, "J": J, "n": n,
        "values": motion.values.ravel().tolist(),
    }
    if not motion.visibility.all():
        doc["visibility"] = motion.visibility.astype(int).tolist()
    if motion.root_translation is not None:
        doc["root_translation"] = motion.root_translation.ravel().tolist()
    return doc


def motion_from_dict(doc: dict, source: str = "<motion>") -> tuple[MotionTensor, SkeletonTopology | None]:
    if doc.get("format") != FORMAT:
        raise MotionFileError(f"{source}: not a motion file (format={doc.get('format')!r})")
    if "version" not in doc:
        raise MotionFileError(f"{source}: missing version field")
    if doc["version"] != VERSION:
        raise MotionFileError(f"{source}: unsupported version {doc['version']}")
    try:
        T, J, n = int(doc["T"]), int(doc["J"]), int(doc["n"])
        rep = doc["repr"]
        values = np.asarray(doc["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise MotionFileError(f"{source}: malformed header or payload ({exc})") from None
    if rep not in REPR_DIMS or REPR_DIMS[rep] != n:
        raise MotionFileError(f"{source}: repr {rep!r} does not match n={n}")
    if values.size != T * J * n:
        raise MotionFileError(f"{source}: declared T*J*n = {T * J * n} but payload has {values.size} values")
    vis = doc.get("visibility")
    if vis is not None:
        vis = np.asarray(vis, dtype=bool)
        if vis.shape != (T, J):
            raise MotionFileError(f"{source}: visibility shape {vis.shape} != {(T, J)}")
    root = doc.get("root_translation")
    if root is not None:
        root = np.asarray(root, dtype=np.float64)
        if root.size != T * 3:
            raise MotionFileError(f"{source}: root_translation needs {T * 3} values, got {root.size}")
    topology = resolve_topology(doc.get("topology"))
    if topology is not None and topology.num_joints != J:
        raise MotionFileError(f"{source}: topology has {topology.num_joints} joints but J={J}")
    motion = MotionTensor(values.reshape(T, J, n), vis, rep, float(doc.get("frame_rate", 30.0)),
                          None if root is None else root.reshape(T, 3))
    return motion, topology


def save_motion(path, motion: MotionTensor, topology: SkeletonTopology | None = None) -> Path:
    return atomic_write_text(path, json.dumps(motion_to_dict(motion, topology)))


def load_motion(path) -> tuple[MotionTensor, SkeletonTopology | None]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MotionFileError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise MotionFileError(f"{path}: expected a JSON object")
    return motion_from_dict(doc, str(path))


def write_dataset(root, train, test, topology: SkeletonTopology | None = None,
                  frame_rate: float = 30.0, repr: str = "position3") -> list[Path]:
    """Write ``train``/``test`` motion arrays (or MotionTensors) as one file per sequence."""
    root = Path(root)
    written = []
    for split, motions in zip(SPLITS, (train, test)):
        for i, m in enumerate(motions):
            if not isinstance(m, MotionTensor):
                m = MotionTensor(m, repr=repr, frame_rate=frame_rate)
            written.append(save_motion(root / split / f"{split}_{i:05d}.json", m, topology))
    return written


def load_split(directory) -> list[MotionTensor]:
    directory = Path(directory)
    files = sorted(directory.glob("*.json"))
    if not files:
        raise MotionFileError(f"{directory}: no motion files found")
    return [load_motion(f)[0] for f in files]


def load_dataset(root) -> tuple[list[MotionTensor], list[MotionTensor]]:
    """``(train, test)`` motions of a dataset directory."""
    root = Path(root)
    missing = [s for s in SPLITS if not (root / s).is_dir()]
    if missing:
        raise MotionFileError(f"{root}: missing split directories {missing}")
    return load_split(root / "train"), load_split(root / "test")
