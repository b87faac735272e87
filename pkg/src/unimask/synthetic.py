"""Procedural walking motions on the default 22-joint skeleton.

Each joint swings sinusoidally at the sequence's gait frequency; the root
translates along a random heading at a speed tied to that frequency.  Global
positions come from forward kinematics.  Everything is a pure function of the
parameters and seed.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .kinematics import (
    SkeletonTopology,
    default_topology,
    forward_kinematics,
    quat_from_axis_angle,
    quat_mul,
)

_X, _Y, _Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)

# name -> (swing axis, amplitude rad, phase rad, constant bias rad)
_SWING = {
    "Hips": (_Y, 0.08, 0.0, 0.0),
    "LeftUpLeg": (_X, -0.45, 0.0, 0.0),
    "LeftLeg": (_X, 0.35, -1.2, 0.45),
    "LeftFoot": (_X, -0.2, 0.6, 0.0),
    "LeftToe": (_X, 0.15, 1.5, 0.0),
    "RightUpLeg": (_X, -0.45, np.pi, 0.0),
    "RightLeg": (_X, 0.35, np.pi - 1.2, 0.45),
    "RightFoot": (_X, -0.2, np.pi + 0.6, 0.0),
    "RightToe": (_X, 0.15, np.pi + 1.5, 0.0),
    "Spine": (_Y, -0.05, 0.0, 0.0),
    "Spine1": (_Y, -0.04, 0.0, 0.03),
    "Spine2": (_X, 0.03, 0.5, 0.0),
    "Neck": (_Y, 0.03, np.pi, 0.0),
    "Head": (_X, 0.03, 0.3, 0.05),
    "LeftShoulder": (_Z, 0.04, 0.0, 0.0),
    "LeftArm": (_X, 0.35, np.pi, 0.0),
    "LeftForeArm": (_X, 0.2, np.pi - 0.5, 0.35),
    "LeftHand": (_X, 0.1, np.pi - 1.0, 0.0),
    "RightShoulder": (_Z, -0.04, np.pi, 0.0),
    "RightArm": (_X, 0.35, 0.0, 0.0),
    "RightForeArm": (_X, 0.2, -0.5, 0.35),
    "RightHand": (_X, 0.1, -1.0, 0.0),
}
# Upper arms hang down from the T-pose before swinging.
_HANG = {"LeftArm": -1.25, "RightArm": 1.25}


@dataclass
class SyntheticGaitParams:
    count: int = 200
    test_count: int = 50
    length: int = 64
    frame_rate: float = 30.0
    freq_range: tuple[float, float] = (0.8, 1.6)
    stride_range: tuple[float, float] = (0.5, 0.9)
    amplitude_range: tuple[float, float] = (0.6, 1.3)
    heading_range: tuple[float, float] = (-0.3, 0.3)
    phase_jitter: float = 0.3
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.freq_range = tuple(float(v) for v in self.freq_range)
        self.stride_range = tuple(float(v) for v in self.stride_range)
        self.amplitude_range = tuple(float(v) for v in self.amplitude_range)
        self.heading_range = tuple(float(v) for v in self.heading_range)
        if min(self.freq_range) <= 0:
            raise ValueError("gait frequencies must be > 0")
        if self.length < 1 or self.count < 0 or self.test_count < 0:
            raise ValueError("length must be >= 1 and counts >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticGaitParams":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown synthetic data keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class GaitSample:
    positions: np.ndarray        # (T, J, 3)
    rotations: np.ndarray        # (T, J, 4) local quaternions
    root_translation: np.ndarray  # (T, 3)
    angles: np.ndarray           # (T, J) swing angle per joint
    frequency: float


def synthesize_gait(params: SyntheticGaitParams, rng: np.random.Generator,
                    topology: SkeletonTopology | None = None) -> GaitSample:
    topology = topology or default_topology()
    T = params.length
    t = np.arange(T) / params.frame_rate
    freq = rng.uniform(*params.freq_range)
    omega = 2.0 * np.pi * freq
    scale = rng.uniform(*params.amplitude_range)
    heading = rng.uniform(*params.heading_range)
    phase0 = rng.uniform(0.0, 2.0 * np.pi)

    J = topology.num_joints
    angles = np.zeros((T, J))
    quats = np.zeros((T, J, 4))
    for j, name in enumerate(topology.names):
        axis, amp, phase, bias = _SWING.get(name, (_X, 0.0, 0.0, 0.0))
        jitter = rng.normal(0.0, params.phase_jitter)
        a = bias + scale * amp * np.sin(omega * t + phase + phase0 + jitter)
        if params.noise_std > 0:
            a = a + rng.normal(0.0, params.noise_std, size=T)
        angles[:, j] = a
        q = quat_from_axis_angle(axis, a)
        if name in _HANG:
            q = quat_mul(q, quat_from_axis_angle(_Z, np.full(T, _HANG[name])))
        if j == 0:
            q = quat_mul(quat_from_axis_angle(_Y, np.full(T, heading)), q)
        quats[:, j] = q

    speed = freq * rng.uniform(*params.stride_range)
    direction = np.array([np.sin(heading), 0.0, np.cos(heading)])
    root = rng.uniform(-1.0, 1.0, size=3) * np.array([1.0, 0.0, 1.0])
    root = root + np.array([0.0, 0.93, 0.0]) + speed * t[:, None] * direction
    root[:, 1] += 0.02 * scale * np.sin(2.0 * omega * t + 2.0 * phase0)
    positions = forward_kinematics(topology, quats, root)
    return GaitSample(positions, quats, root, angles, freq)


def split_seeds(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent seed streams for the train and test splits."""
    train, test = np.random.SeedSequence(seed).spawn(2)
    return train, test


def generate_split(params: SyntheticGaitParams, split: str = "train",
                   topology: SkeletonTopology | None = None) -> list[GaitSample]:
    stream = split_seeds(params.seed)[0 if split == "train" else 1]
    n = params.count if split == "train" else params.test_count
    return [synthesize_gait(params, np.random.default_rng(s), topology) for s in stream.spawn(n)]


def generate_dataset(params: SyntheticGaitParams) -> tuple[np.ndarray, np.ndarray]:
    """Train and test position arrays ``(N, T, 22, 3)``."""
    train = np.stack([s.positions for s in generate_split(params, "train")]) if params.count else \
        np.zeros((0, params.length, 22, 3))
    test = np.stack([s.positions for s in generate_split(params, "test")]) if params.test_count else \
        np.zeros((0, params.length, 22, 3))
    return train, test
