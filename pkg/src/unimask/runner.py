"""Experiment plumbing shared by the command line and the test-suite.

Loads a dataset in the representation a model expects, cuts evaluation
windows, and scores a model against the two classical baselines.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .bvh import parse_bvh
from .config import DataConfig, RunConfig
from .kinematics import (
    ORTHO6D,
    POSITION3,
    MotionTensor,
    SkeletonTopology,
    forward_kinematics,
    quaternion_to_rot6d,
)
from .masking import MaskSpec
from .metrics import (
    DEFAULT_HORIZONS_MS,
    EvalReport,
    baseline_interpolation,
    baseline_zero_velocity,
    horizon_frames,
    l2p,
    l2q,
    masked_mpjpe,
    mpjpe,
    npss,
    position_statistics,
)
from .motionfile import MotionFileError, load_dataset
from .patches import PatchScheme
from .synthetic import generate_split


class DataError(ValueError):
    """Input data missing, malformed or unusable for the requested run."""


def to_repr(motion: MotionTensor, repr: str, topology: SkeletonTopology) -> np.ndarray:
    """Motion values in ``repr``; rotations become positions through FK."""
    if motion.repr == repr:
        return motion.values
    if motion.repr == ORTHO6D and repr == POSITION3:
        if motion.values.shape[1] != topology.num_joints:
            raise DataError(f"motion has {motion.values.shape[1]} joints, topology {topology.num_joints}")
        return forward_kinematics(topology, motion.values, motion.root_translation)
    raise DataError(f"cannot convert {motion.repr} data to {repr}")


def load_data(data: DataConfig, repr: str, topology: SkeletonTopology
              ) -> tuple[list[np.ndarray], list[np.ndarray], SkeletonTopology, float]:
    """``(train, test, topology, frame_rate)`` with motions as ``(T, J, n)`` arrays."""
    if data.source == "synthetic":
        params = data.synthetic
        out = []
        for split in ("train", "test"):
            samples = generate_split(params, split, topology)
            if repr == POSITION3:
                out.append([s.positions for s in samples])
            else:
                out.append([quaternion_to_rot6d(s.rotations) for s in samples])
        return out[0], out[1], topology, params.frame_rate

    path = Path(data.path)
    if not path.exists():
        raise DataError(f"data path not found: {path}")
    if data.source == "motion_dir":
        try:
            train, test = load_dataset(path)
        except MotionFileError as exc:
            raise DataError(str(exc)) from None
        rate = train[0].frame_rate
        return ([to_repr(m, repr, topology) for m in train], [to_repr(m, repr, topology) for m in test],
                topology, rate)

    files = sorted(path.glob("*.bvh"))
    if len(files) < 2:
        raise DataError(f"{path}: need at least two .bvh files for a train/test split")
    parsed = [parse_bvh(f) for f in files]
    topology = parsed[0][0]
    for f, (topo, _) in zip(files, parsed):
        if topo.names != topology.names or topo.parents != topology.parents:
            raise DataError(f"{f}: skeleton differs from {files[0].name}")
    n_test = max(1, int(round(len(files) * data.test_fraction)))
    motions = [to_repr(m, repr, topology) for _, m in parsed]
    return motions[:-n_test], motions[-n_test:], topology, parsed[0][1].frame_rate


def evaluation_windows(motions: Sequence[np.ndarray], window: int, stride: int | None = None) -> np.ndarray:
    """Every ``window``-frame slice starting at multiples of ``stride`` (default ``window // 2``)."""
    stride = stride or max(window // 2, 1)
    out = []
    for m in motions:
        m = np.asarray(m, dtype=np.float64)
        for s in range(0, m.shape[0] - window + 1, stride):
            out.append(m[s:s + window])
    if not out:
        raise DataError(f"no test motion is at least {window} frames long")
    return np.stack(out)


def target_frames(spec: MaskSpec, T: int) -> np.ndarray:
    """Frames a task synthesises: the transition for inbetweening, else everything after ``t_obs``."""
    if spec.kind == "inbetween":
        return np.arange(spec.past, spec.past + spec.transition)
    if spec.kind == "custom":
        return np.arange(T)
    return np.arange(spec.t_obs, T)


def fingerprint(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:12]


def evaluate(
    predictors: dict,
    windows: np.ndarray,
    visibility: np.ndarray,
    spec: MaskSpec,
    repr: str,
    topology: SkeletonTopology,
    train_positions: np.ndarray | None = None,
    frame_rate: float = 30.0,
    unit_scale: float = 1000.0,
    horizons_ms: Sequence[float] = DEFAULT_HORIZONS_MS,
    fingerprint_source=None,
) -> EvalReport:
    """Score each ``name -> fn(windows, visibility)`` predictor on one masked test set.

    Columns: ``MPJPE@<k>`` (hidden joints, in ``unit_scale`` units), per-horizon
    ``MPJPE@<ms>ms`` for forecasting-style masks, and ``L2P@<k>``/``NPSS@<k>``
    (plus ``L2Q@<k>`` for rotation data) over the ``k`` target frames.
    """
    T = windows.shape[1]
    frames = target_frames(spec, T)
    k = len(frames)
    truth_pos = windows if repr == POSITION3 else forward_kinematics(topology, windows)
    if train_positions is None:
        train_positions = truth_pos
    mean, std = position_statistics(train_positions)
    report = EvalReport(sample_count=len(windows),
                        fingerprint=fingerprint(fingerprint_source) if fingerprint_source is not None else "")
    for name, fn in predictors.items():
        pred = np.asarray(fn(windows, visibility), dtype=np.float64)
        if repr == POSITION3:
            pos = pred
        else:
            pos = forward_kinematics(topology, pred)
        report.add(name, f"MPJPE@{k}", unit_scale * masked_mpjpe(pos, truth_pos, visibility))
        if spec.kind in ("forecast", "occlusion", "completion"):
            for ms, f in zip(horizons_ms, horizon_frames(horizons_ms, frame_rate, spec.t_obs)):
                if f < T:
                    report.add(name, f"MPJPE@{ms:g}ms", unit_scale * float(mpjpe(pos, truth_pos, [f])[0]))
        report.add(name, f"L2P@{k}", l2p(pos, truth_pos, mean, std, frames))
        if repr == ORTHO6D:
            _, gq_pred = forward_kinematics(topology, pred, return_rotations=True)
            _, gq_true = forward_kinematics(topology, windows, return_rotations=True)
            report.add(name, f"L2Q@{k}", l2q(gq_pred, gq_true, frames))
            feats_p, feats_t = gq_pred[:, frames], gq_true[:, frames]
        else:
            feats_p, feats_t = pos[:, frames], truth_pos[:, frames]
        N = len(windows)
        report.add(name, f"NPSS@{k}", npss(feats_p.reshape(N, k, -1), feats_t.reshape(N, k, -1)))
    return report


def baseline_predictors(repr: str) -> dict:
    return {
        "zero_velocity": lambda x, v: baseline_zero_velocity(x, v, repr),
        "interpolation": lambda x, v: baseline_interpolation(x, v, repr),
    }


def model_predictor(model, batch: int = 32):
    def run(x, v):
        return np.concatenate([model.predict(x[i:i + batch], v[i:i + batch]) for i in range(0, len(x), batch)])
    return run


def eval_masks(spec: MaskSpec, n: int, T: int, scheme: PatchScheme, seed: int) -> np.ndarray:
    """Deterministic evaluation masks, independent of the training stream."""
    return spec.generate_batch(n, T, scheme, np.random.default_rng([seed, 0xE7A1]))


def run_evaluation(config: RunConfig, model=None, windows_stride: int | None = None) -> EvalReport:
    """Load data per ``config`` and evaluate the baselines (and ``model`` if given)."""
    repr = model.config.repr if model is not None else config.model.repr
    train, test, topology, rate = load_data(config.data, repr, config.topology)
    spec = config.mask
    T = spec.window_length(default=None)
    windows = evaluation_windows(test, T, windows_stride)
    scheme = model.scheme if model is not None else config.model.resolve_scheme(topology)
    vis = eval_masks(spec, len(windows), T, scheme, config.seed)
    train_pos = np.concatenate([m if repr == POSITION3 else forward_kinematics(topology, m) for m in train])
    predictors = baseline_predictors(repr)
    if model is not None:
        predictors["unimask"] = model_predictor(model)
    return evaluate(predictors, windows, vis, spec, repr, topology, train_pos, rate,
                    config.data.unit_scale, fingerprint_source=config.to_dict())
