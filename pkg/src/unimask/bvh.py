"""Reader for the common subset of the BVH motion-capture format.

Supported: one ``ROOT`` hierarchy of ``JOINT`` and ``End Site`` blocks,
``OFFSET`` lines and ``CHANNELS`` drawn from X/Y/Z position and rotation.
Rotation channels are in degrees and compose in the order they are listed.
End sites are not joints and are dropped.  Position channels on non-root
joints are ignored with a warning.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import ORTHO6D, MotionTensor, SkeletonTopology, euler_to_quaternion, quaternion_to_rot6d

CHANNELS = ("Xposition", "Yposition", "Zposition", "Xrotation", "Yrotation", "Zrotation")


class BVHParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class _Joint:
    name: str
    parent: int
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    channels: list[str] = field(default_factory=list)


def _floats(tokens, count: int, lineno: int, what: str) -> list[float]:
    if len(tokens) != count:
        raise BVHParseError(f"{what} expects {count} numbers, got {len(tokens)}", lineno)
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise BVHParseError(f"non-numeric {what} value in {tokens}", lineno) from None


def _parse_hierarchy(lines: list[tuple[int, list[str]]], pos: int) -> tuple[list[_Joint], int]:
    joints: list[_Joint] = []
    stack: list[int | None] = []   # joint index per open brace, None for End Site
    pending: int | None | str = "none"
    opened_at: list[int] = []
    while pos < len(lines):
        lineno, tok = lines[pos]
        head = tok[0]
        if head in ("ROOT", "JOINT"):
            if head == "ROOT" and joints:
                raise BVHParseError("only one ROOT hierarchy is supported", lineno)
            if head == "JOINT" and not stack:
                raise BVHParseError("JOINT outside of a ROOT block", lineno)
            if len(tok) < 2:
                raise BVHParseError(f"{head} needs a name", lineno)
            parent = -1 if head == "ROOT" else stack[-1]
            if parent is None:
                raise BVHParseError("End Site cannot have children", lineno)
            joints.append(_Joint(" ".join(tok[1:]), parent))
            pending = len(joints) - 1
        elif head == "End":
            pending = None
        elif head == "{":
            if pending == "none":
                raise BVHParseError("unexpected '{'", lineno)
            stack.append(pending)
            opened_at.append(lineno)
            pending = "none"
        elif head == "}":
            if not stack:
                raise BVHParseError("unbalanced braces: '}' without matching '{'", lineno)
            stack.pop()
            opened_at.pop()
            if not stack:
                return joints, pos + 1
        elif head == "OFFSET":
            if not stack:
                raise BVHParseError("OFFSET outside of a block", lineno)
            off = _floats(tok[1:], 3, lineno, "OFFSET")
            if stack[-1] is not None:
                joints[stack[-1]].offset = tuple(off)
        elif head == "CHANNELS":
            if not stack or stack[-1] is None:
                raise BVHParseError("CHANNELS outside of a joint block", lineno)
            try:
                n = int(tok[1])
            except (IndexError, ValueError):
                raise BVHParseError("CHANNELS needs a channel count", lineno) from None
            names = tok[2:]
            if len(names) != n:
                raise BVHParseError(f"CHANNELS declares {n} channels but lists {len(names)}", lineno)
            for c in names:
                if c not in CHANNELS:
                    raise BVHParseError(f"unknown channel {c!r}", lineno)
            joints[stack[-1]].channels = list(names)
        elif head == "MOTION":
            raise BVHParseError(f"unbalanced braces: block opened at line {opened_at[-1]} is never closed",
                                lineno)
        else:
            raise BVHParseError(f"unexpected token {head!r} in HIERARCHY", lineno)
        pos += 1
    last = opened_at[-1] if opened_at else (lines[-1][0] if lines else None)
    raise BVHParseError("unbalanced braces: hierarchy ends inside an open block", last)


def _header_value(lines, pos: int, key: str) -> tuple[str, int]:
    if pos >= len(lines):
        raise BVHParseError(f"missing '{key}' line")
    lineno, tok = lines[pos]
    text = " ".join(tok)
    if not text.startswith(key):
        raise BVHParseError(f"expected '{key}', got {text!r}", lineno)
    value = text[len(key):].strip()
    if not value:
        raise BVHParseError(f"'{key}' has no value", lineno)
    return value, lineno


def parse_bvh_text(text: str, source: str = "<bvh>") -> tuple[SkeletonTopology, MotionTensor]:
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines or lines[0][1][0] != "HIERARCHY":
        raise BVHParseError("file must start with HIERARCHY", lines[0][0] if lines else None)
    joints, pos = _parse_hierarchy(lines, 1)
    if not joints:
        raise BVHParseError("no ROOT joint found", lines[0][0])
    if pos >= len(lines) or lines[pos][1][0] != "MOTION":
        if pos < len(lines) and lines[pos][1][0] == "}":
            raise BVHParseError("unbalanced braces: '}' without matching '{'", lines[pos][0])
        raise BVHParseError("missing MOTION section", lines[pos][0] if pos < len(lines) else None)
    value, lineno = _header_value(lines, pos + 1, "Frames:")
    try:
        n_frames = int(value)
    except ValueError:
        raise BVHParseError(f"invalid frame count {value!r}", lineno) from None
    value, lineno = _header_value(lines, pos + 2, "Frame Time:")
    try:
        frame_time = float(value)
    except ValueError:
        raise BVHParseError(f"invalid frame time {value!r}", lineno) from None
    if frame_time <= 0:
        raise BVHParseError("frame time must be positive", lineno)

    n_channels = sum(len(j.channels) for j in joints)
    rows = lines[pos + 3:]
    if len(rows) != n_frames:
        where = rows[-1][0] if rows else lineno
        raise BVHParseError(f"header declares {n_frames} frames but {len(rows)} frame lines follow", where)
    data = np.empty((n_frames, n_channels))
    for f, (ln, tok) in enumerate(rows):
        data[f] = _floats(tok, n_channels, ln, "frame")

    J = len(joints)
    quats = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (n_frames, J, 1))
    root = np.tile(np.asarray(joints[0].offset), (n_frames, 1))
    col = 0
    for j, joint in enumerate(joints):
        rot = [(k, c[0]) for k, c in enumerate(joint.channels) if c.endswith("rotation")]
        posc = [(k, c[0]) for k, c in enumerate(joint.channels) if c.endswith("position")]
        block = data[:, col:col + len(joint.channels)]
        if rot:
            order = "".join(a for _, a in rot)
            quats[:, j] = euler_to_quaternion(block[:, [k for k, _ in rot]], order)
        if posc:
            if j == 0:
                for k, a in posc:
                    root[:, "XYZ".index(a)] += block[:, k]
            else:
                warnings.warn(f"{source}: ignoring position channels on non-root joint {joint.name!r}")
        col += len(joint.channels)

    topology = SkeletonTopology([j.name for j in joints], [j.parent for j in joints],
                                np.array([j.offset for j in joints]), name=Path(source).stem)
    motion = MotionTensor(quaternion_to_rot6d(quats), repr=ORTHO6D, frame_rate=1.0 / frame_time,
                          root_translation=root)
    return topology, motion


def parse_bvh(path) -> tuple[SkeletonTopology, MotionTensor]:
    """Skeleton and ortho-6D local rotations (plus root translation) of a BVH file."""
    path = Path(path)
    return parse_bvh_text(path.read_text(), str(path))
