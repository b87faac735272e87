"""Skeletons, rotation representations and forward kinematics.

Quaternions are stored as ``(w, x, y, z)`` in the last axis.  Every function
here is vectorised over leading axes and pure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POSITION3 = "position3"
ORTHO6D = "ortho6d"
REPR_DIMS = {POSITION3: 3, ORTHO6D: 6}


class DegenerateRotationError(ValueError):
    pass


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint names, parent links and rest offsets, in topological order."""

    names: tuple[str, ...]
    parents: tuple[int, ...]
    offsets: np.ndarray = field(compare=False)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "offsets", offsets)
        if not (len(self.names) == len(self.parents) == len(offsets)):
            raise ValueError("names, parents and offsets must have equal length")
        if len(self.names) == 0:
            raise ValueError("a skeleton needs at least one joint")
        roots = [j for j, p in enumerate(self.parents) if p < 0]
        if roots != [0]:
            raise ValueError(f"expected joint 0 as the only root, got roots {roots}")
        for j, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < j:
                raise ValueError(f"joint {j} ({self.names[j]}) has parent {p}; parents must precede children")

    @property
    def num_joints(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "names": list(self.names),
            "parents": list(self.parents),
            "offsets": self.offsets.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTopology":
        return cls(d["names"], d["parents"], np.asarray(d["offsets"]), d.get("name", "custom"))


# 22 joints, LaFAN1-style ordering.  Offsets are in metres.
_DEFAULT_JOINTS = [
    ("Hips", -1, (0.0, 0.0, 0.0)),
    ("LeftUpLeg", 0, (0.1, -0.05, 0.0)),
    ("LeftLeg", 1, (0.0, -0.42, 0.0)),
    ("LeftFoot", 2, (0.0, -0.41, 0.0)),
    ("LeftToe", 3, (0.0, -0.05, 0.14)),
    ("RightUpLeg", 0, (-0.1, -0.05, 0.0)),
    ("RightLeg", 5, (0.0, -0.42, 0.0)),
    ("RightFoot", 6, (0.0, -0.41, 0.0)),
    ("RightToe", 7, (0.0, -0.05, 0.14)),
    ("Spine", 0, (0.0, 0.1, 0.0)),
    ("Spine1", 9, (0.0, 0.12, 0.0)),
    ("Spine2", 10, (0.0, 0.12, 0.0)),
    ("Neck", 11, (0.0, 0.16, 0.0)),
    ("Head", 12, (0.0, 0.1, 0.02)),
    ("LeftShoulder", 11, (0.04, 0.12, 0.0)),
    ("LeftArm", 14, (0.14, 0.0, 0.0)),
    ("LeftForeArm", 15, (0.27, 0.0, 0.0)),
    ("LeftHand", 16, (0.25, 0.0, 0.0)),
    ("RightShoulder", 11, (-0.04, 0.12, 0.0)),
    ("RightArm", 18, (-0.14, 0.0, 0.0)),
    ("RightForeArm", 19, (-0.27, 0.0, 0.0)),
    ("RightHand", 20, (-0.25, 0.0, 0.0)),
]


def default_topology() -> SkeletonTopology:
    names, parents, offsets = zip(*_DEFAULT_JOINTS)
    return SkeletonTopology(names, parents, np.array(offsets), name="default22")


@dataclass
class MotionTensor:
    """A ``T x J x n`` motion with its ``T x J`` visibility (True = observed)."""

    values: np.ndarray
    visibility: np.ndarray | None = None
    repr: str = POSITION3
    frame_rate: float = 30.0
    root_translation: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"motion values must be T x J x n, got shape {self.values.shape}")
        if self.repr not in REPR_DIMS:
            raise ValueError(f"unknown representation {self.repr!r}")
        T, J, n = self.values.shape
        if T < 1 or J < 1 or n != REPR_DIMS[self.repr]:
            raise ValueError(f"shape {self.values.shape} does not fit representation {self.repr}")
        if self.visibility is None:
            self.visibility = np.ones((T, J), dtype=bool)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        if self.visibility.shape != (T, J):
            raise ValueError(f"visibility shape {self.visibility.shape} != {(T, J)}")
        if self.root_translation is not None:
            self.root_translation = np.asarray(self.root_translation, dtype=np.float64).reshape(T, 3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def pose_dim(self) -> int:
        return self.values.shape[1] * self.values.shape[2]


# -- rotations -------------------------------------------------------------
def _normalize(v: np.ndarray, what: str) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise DegenerateRotationError(f"cannot normalise a zero-length {what}")
    return v / norm


def rot6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Gram-Schmidt the two 3-vectors of an ortho-6D rotation into a matrix.

    The two 3-vectors become the first two columns; the third is their cross
    product, so ``det = +1``.
    """
    r6 = np.asarray(r6, dtype=np.float64)
    a1, a2 = r6[..., :3], r6[..., 3:6]
    b1 = _normalize(a1, "first column")
    b2 = _normalize(a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1, "second column residual")
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def matrix_to_quaternion(R: np.ndarray, atol: float = 1e-6) -> np.ndarray:
    """Unit quaternion of a rotation matrix, with ``w >= 0``."""
    R = np.asarray(R, dtype=np.float64)
    eye = np.eye(3)
    err = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max(axis=(-1, -2))
    det = np.linalg.det(R)
    if np.any(err > atol) or np.any(np.abs(det - 1.0) > atol):
        raise ValueError("input is not a rotation matrix within tolerance")
    m = R
    trace = m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]
    # Shepperd: pick the largest of 4w^2, 4x^2, 4y^2, 4z^2 for stability.
    cands = np.stack(
        [
            1 + trace,
            1 + m[..., 0, 0] - m[..., 1, 1] - m[..., 2, 2],
            1 - m[..., 0, 0] + m[..., 1, 1] - m[..., 2, 2],
            1 - m[..., 0, 0] - m[..., 1, 1] + m[..., 2, 2],
        ],
        axis=-1,
    )
    best = np.argmax(cands, axis=-1)
    s = np.sqrt(np.maximum(np.take_along_axis(cands, best[..., None], -1)[..., 0], 0.0)) * 2
    q = np.empty(m.shape[:-2] + (4,))
    opts = [
        np.stack([0.25 * s, (m[..., 2, 1] - m[..., 1, 2]) / s,
                  (m[..., 0, 2] - m[..., 2, 0]) / s, (m[..., 1, 0] - m[..., 0, 1]) / s], -1),
        np.stack([(m[..., 2, 1] - m[..., 1, 2]) / s, 0.25 * s,
                  (m[..., 0, 1] + m[..., 1, 0]) / s, (m[..., 0, 2] + m[..., 2, 0]) / s], -1),
        np.stack([(m[..., 0, 2] - m[..., 2, 0]) / s, (m[..., 0, 1] + m[..., 1, 0]) / s,
                  0.25 * s, (m[..., 1, 2] + m[..., 2, 1]) / s], -1),
        np.stack([(m[..., 1, 0] - m[..., 0, 1]) / s, (m[..., 0, 2] + m[..., 2, 0]) / s,
                  (m[..., 1, 2] + m[..., 2, 1]) / s, 0.25 * s], -1),
    ]
    for k in range(4):
        sel = best == k
        q[sel] = opts[k][sel]
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return np.where(q[..., :1] < 0, -q, q)


def rot6d_to_quaternion(r6: np.ndarray) -> np.ndarray:
    return matrix_to_quaternion(rot6d_to_matrix(r6))


def quaternion_to_rot6d(q: np.ndarray) -> np.ndarray:
    return matrix_to_rot6d(quat_to_matrix(q))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=np.float64), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=np.float64), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vectors ``v`` by unit quaternions ``q``."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(axis: Sequence[float] | np.ndarray, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=np.float64)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def hemisphere_align(q: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip ``q`` where needed so that ``dot(q, reference) >= 0``."""
    q = np.asarray(q, dtype=np.float64)
    dot = np.sum(q * np.asarray(reference, dtype=np.float64), axis=-1, keepdims=True)
    return np.where(dot < 0, -q, q)


def quat_angle(q0: np.ndarray, q1: np.ndarray) -> np.ndarray:
    """Rotation angle (radians) between two unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = hemisphere_align(q1, q0)
    # atan2 of chord lengths stays accurate for tiny and near-pi angles alike.
    return 4.0 * np.arctan2(np.linalg.norm(q1 - q0, axis=-1), np.linalg.norm(q1 + q0, axis=-1))


def slerp(q0: np.ndarray, q1: np.ndarray, t) -> np.ndarray:
    """Constant-angular-velocity interpolation; ``q1`` is aligned to ``q0`` first."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = hemisphere_align(q1, q0)
    t = np.asarray(t, dtype=np.float64)[..., None]
    theta = 2.0 * np.arctan2(np.linalg.norm(q1 - q0, axis=-1, keepdims=True),
                             np.linalg.norm(q1 + q0, axis=-1, keepdims=True))
    small = theta < 1e-6
    sin = np.where(small, 1.0, np.sin(theta))
    w0 = np.where(small, 1.0 - t, np.sin((1.0 - t) * theta) / sin)
    w1 = np.where(small, t, np.sin(t * theta) / sin)
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


_AXES = {"X": (1.0, 0.0, 0.0), "Y": (0.0, 1.0, 0.0), "Z": (0.0, 0.0, 1.0)}


def euler_to_quaternion(angles_deg: np.ndarray, order: str) -> np.ndarray:
    """Compose per-axis rotations in the given channel order, e.g. ``"ZXY"``.

    ``angles_deg[..., k]`` is the rotation about axis ``order[k]``; the result
    is ``R_order[0] @ R_order[1] @ R_order[2]`` (the BVH convention).
    """
    angles = np.radians(np.asarray(angles_deg, dtype=np.float64))
    q = None
    for k, ax in enumerate(order):
        qk = quat_from_axis_angle(_AXES[ax], angles[..., k])
        q = qk if q is None else quat_mul(q, qk)
    return q


# -- forward kinematics ----------------------------------------------------
def _as_quaternions(rotations: np.ndarray) -> np.ndarray:
    rotations = np.asarray(rotations, dtype=np.float64)
    if rotations.shape[-1] == 4:
        return rotations / np.linalg.norm(rotations, axis=-1, keepdims=True)
    if rotations.shape[-1] == 6:
        return rot6d_to_quaternion(rotations)
    raise ValueError(f"rotations must end in 4 (quaternion) or 6 (ortho-6D), got {rotations.shape}")


def forward_kinematics(
    topology: SkeletonTopology,
    rotations: np.ndarray,
    root_translation: np.ndarray | None = None,
    return_rotations: bool = False,
):
    """Global joint positions ``(..., J, 3)`` from local joint rotations.

    ``rotations`` has shape ``(..., J, 4)`` (quaternions) or ``(..., J, 6)``.
    The root sits at ``root_translation`` (or its offset when omitted).
    """
    quats = _as_quaternions(rotations)
    J = topology.num_joints
    if quats.shape[-2] != J:
        raise ValueError(f"rotations cover {quats.shape[-2]} joints, topology has {J}")
    lead = quats.shape[:-2]
    gq = np.empty(lead + (J, 4))
    gp = np.empty(lead + (J, 3))
    gq[..., 0, :] = quats[..., 0, :]
    if root_translation is None:
        gp[..., 0, :] = topology.offsets[0]
    else:
        gp[..., 0, :] = np.asarray(root_translation, dtype=np.float64)
    for j in range(1, J):
        p = topology.parents[j]
        gq[..., j, :] = quat_mul(gq[..., p, :], quats[..., j, :])
        gp[..., j, :] = gp[..., p, :] + quat_rotate(gq[..., p, :], topology.offsets[j])
    if return_rotations:
        return gp, gq
    return gp
