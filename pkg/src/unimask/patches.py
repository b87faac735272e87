"""Body-part patch schemes used by pose decomposition and token masks.

Variants on the default 22-joint skeleton:

    S1  one patch per joint (L = J)
    S2  the whole body as one patch (L = 1)
    S3  trunk, left leg, right leg, left arm, right arm (L = 5)
    S4  as S3 with the shoulders moved into the trunk
    S5  as S3 with the hips split off the trunk (L = 6)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kinematics import SkeletonTopology

VARIANTS = ("S1", "S2", "S3", "S4", "S5")

_TRUNK = ["Hips", "Spine", "Spine1", "Spine2", "Neck", "Head"]
_LEFT_LEG = ["LeftUpLeg", "LeftLeg", "LeftFoot", "LeftToe"]
_RIGHT_LEG = ["RightUpLeg", "RightLeg", "RightFoot", "RightToe"]
_LEFT_ARM = ["LeftShoulder", "LeftArm", "LeftForeArm", "LeftHand"]
_RIGHT_ARM = ["RightShoulder", "RightArm", "RightForeArm", "RightHand"]

_NAMED_GROUPS = {
    "S3": [_TRUNK, _LEFT_LEG, _RIGHT_LEG, _LEFT_ARM, _RIGHT_ARM],
    "S4": [
        _TRUNK + ["LeftShoulder", "RightShoulder"],
        _LEFT_LEG, _RIGHT_LEG, _LEFT_ARM[1:], _RIGHT_ARM[1:],
    ],
    "S5": [["Hips"], _TRUNK[1:], _LEFT_LEG, _RIGHT_LEG, _LEFT_ARM, _RIGHT_ARM],
}


@dataclass(frozen=True)
class PatchScheme:
    """A partition of the joints into ``L`` ordered patches."""

    groups: tuple[tuple[int, ...], ...]
    num_joints: int
    variant: str = "custom"

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(j) for j in g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [j for g in groups for j in g]
        if any(len(g) == 0 for g in groups):
            raise ValueError("patches must be non-empty")
        if sorted(flat) != list(range(self.num_joints)):
            raise ValueError(
                f"patch groups must partition joints 0..{self.num_joints - 1}, got {groups}"
            )

    @property
    def num_patches(self) -> int:
        return len(self.groups)

    L = num_patches

    @property
    def sizes(self) -> tuple[int, ...]:
        """Joint count ``n_l`` of each patch."""
        return tuple(len(g) for g in self.groups)

    @property
    def joint_to_patch(self) -> np.ndarray:
        out = np.empty(self.num_joints, dtype=np.int64)
        for l, g in enumerate(self.groups):
            out[list(g)] = l
        return out

    @property
    def permutation(self) -> np.ndarray:
        """Joint indices in patch-concatenation order."""
        return np.array([j for g in self.groups for j in g], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "groups": [list(g) for g in self.groups],
                "num_joints": self.num_joints}

    @classmethod
    def from_dict(cls, d: dict) -> "PatchScheme":
        return cls(tuple(tuple(g) for g in d["groups"]), d["num_joints"], d.get("variant", "custom"))


def make_scheme(variant: str, topology: SkeletonTopology) -> PatchScheme:
    """Build one of the S1..S5 schemes for ``topology``.

    S3-S5 look joints up by their default-skeleton names.
    """
    J = topology.num_joints
    if variant == "S1":
        return PatchScheme(tuple((j,) for j in range(J)), J, "S1")
    if variant == "S2":
        return PatchScheme((tuple(range(J)),), J, "S2")
    if variant not in _NAMED_GROUPS:
        raise ValueError(f"unknown patch variant {variant!r}; expected one of {VARIANTS}")
    try:
        groups = tuple(tuple(topology.index(n) for n in names) for names in _NAMED_GROUPS[variant])
    except ValueError as exc:
        raise ValueError(f"variant {variant} needs default joint names: {exc}") from None
    return PatchScheme(groups, J, variant)


def custom_scheme(groups: Sequence[Sequence[int]], num_joints: int) -> PatchScheme:
    return PatchScheme(tuple(tuple(g) for g in groups), num_joints, "custom")
