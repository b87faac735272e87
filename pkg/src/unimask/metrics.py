"""Evaluation metrics (MPJPE, L2P, L2Q, NPSS), classical baselines and reports."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kinematics import POSITION3, hemisphere_align
from .pipeline import fill_motion

# Forecasting horizons in milliseconds.
DEFAULT_HORIZONS_MS = (80, 160, 320, 400, 560, 1000)


class MetricInputError(ValueError):
    pass


def _positions(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 3:
        raise MetricInputError(f"{name} must hold 3-d positions, got trailing dim {x.shape[-1]}")
    if x.ndim == 3:
        x = x[None]
    return x


def mpjpe(pred, truth, frames: Sequence[int] | None = None) -> np.ndarray:
    """Mean per-joint position error at each frame (or at the given frames).

    Inputs are ``(N, T, J, 3)`` or ``(T, J, 3)``; the mean runs over samples and
    joints, in the data's units.
    """
    p, t = _positions(pred, "pred"), _positions(truth, "truth")
    if p.shape != t.shape:
        raise MetricInputError(f"shape mismatch {p.shape} vs {t.shape}")
    err = np.linalg.norm(p - t, axis=-1).mean(axis=(0, 2))
    return err if frames is None else err[np.asarray(frames, dtype=int)]


def masked_mpjpe(pred, truth, visibility) -> float:
    """Mean joint position error over hidden ``(sample, frame, joint)`` entries."""
    p, t = _positions(pred, "pred"), _positions(truth, "truth")
    hidden = ~np.asarray(visibility, dtype=bool).reshape(p.shape[:-1])
    if not hidden.any():
        raise MetricInputError("no hidden entries to score")
    return float(np.linalg.norm(p - t, axis=-1)[hidden].mean())


def horizon_frames(horizons_ms: Iterable[float], fps: float, t_obs: int) -> list[int]:
    """Frame index of each horizon, counting the first predicted frame as 1 step."""
    return [t_obs + int(round(ms * fps / 1000.0)) - 1 for ms in horizons_ms]


def _per_frame_l2(a: np.ndarray, b: np.ndarray, frames) -> float:
    diff = (a - b).reshape(a.shape[0], a.shape[1], -1)
    norms = np.linalg.norm(diff, axis=-1)
    if frames is not None:
        norms = norms[:, np.asarray(frames, dtype=int)]
    return float(norms.mean())


def l2p(pred, truth, mean=None, std=None, frames: Sequence[int] | None = None) -> float:
    """Average per-frame L2 distance of (standardised) global positions.

    ``mean``/``std`` broadcast against the flattened ``J*3`` pose vector and
    normally come from the training split.
    """
    p, t = _positions(pred, "pred"), _positions(truth, "truth")
    N, T = p.shape[:2]
    p = p.reshape(N, T, -1)
    t = t.reshape(N, T, -1)
    if mean is not None:
        p, t = p - mean, t - mean
    if std is not None:
        p, t = p / std, t / std
    return _per_frame_l2(p, t, frames)


def position_statistics(positions) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and std of flattened ``J*3`` poses."""
    x = np.asarray(positions, dtype=np.float64)
    flat = x.reshape(-1, x.shape[-2] * x.shape[-1])
    std = flat.std(axis=0)
    return flat.mean(axis=0), np.where(std > 1e-12, std, 1.0)


def _unit_quats(q, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 4:
        raise MetricInputError(f"{name} must hold quaternions")
    if np.any(np.abs(np.linalg.norm(q, axis=-1) - 1.0) > 1e-6):
        raise MetricInputError(f"{name} contains non-unit quaternions")
    return q[None] if q.ndim == 3 else q


def l2q(pred, truth, frames: Sequence[int] | None = None) -> float:
    """Average per-frame L2 distance of hemisphere-aligned joint quaternions."""
    p, t = _unit_quats(pred, "pred"), _unit_quats(truth, "truth")
    return _per_frame_l2(hemisphere_align(p, t), t, frames)


def npss(pred, truth) -> float:
    """Normalised power spectrum similarity of ``(N, T, F)`` feature sequences.

    Per feature, the DFT power spectrum is normalised to unit mass and the
    earth mover's distance between prediction and truth is the L1 distance of
    the cumulative spectra.  Features are averaged with weights equal to the
    ground-truth power.  Features without ground-truth power are skipped.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise MetricInputError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.ndim == 2:
        p, t = p[None], t[None]
    p_pow = np.abs(np.fft.fft(p, axis=1)) ** 2
    t_pow = np.abs(np.fft.fft(t, axis=1)) ** 2
    t_total = t_pow.sum(axis=1)
    p_total = p_pow.sum(axis=1)
    keep = t_total > 0
    if not keep.all():
        warnings.warn(f"NPSS: skipping {int((~keep).sum())} feature(s) with zero ground-truth power")
    if not keep.any():
        return 0.0
    t_norm = t_pow / np.where(keep, t_total, 1.0)[:, None, :]
    p_norm = p_pow / np.where(p_total > 0, p_total, 1.0)[:, None, :]
    emd = np.abs(np.cumsum(p_norm, axis=1) - np.cumsum(t_norm, axis=1)).sum(axis=1)
    return float(np.average(emd[keep], weights=t_total[keep]))


def baseline_zero_velocity(x, visibility, repr: str = POSITION3) -> np.ndarray:
    """Hold the last visible value of each joint (repeat-last-pose)."""
    return fill_motion(x, visibility, "repeat_last", repr).x_fill


def baseline_interpolation(x, visibility, repr: str = POSITION3) -> np.ndarray:
    """Linear (positions) or SLERP (rotations) interpolation between key poses."""
    return fill_motion(x, visibility, "interpolate", repr).x_fill


@dataclass
class EvalReport:
    """Metric table: one row per method, one column per metric/horizon."""

    rows: dict[str, dict[str, float]] = field(default_factory=dict)
    sample_count: int = 0
    fingerprint: str = ""

    def add(self, method: str, column: str, value: float) -> None:
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"{method}/{column}: metric values must be finite and >= 0, got {value}")
        self.rows.setdefault(method, {})[column] = value

    @property
    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows.values():
            cols.extend(c for c in row if c not in cols)
        return cols

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "value", "samples", "fingerprint"])
        for method, row in self.rows.items():
            for col, val in row.items():
                w.writerow([method, col, repr(val), self.sample_count, self.fingerprint])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text_or_path) -> "EvalReport":
        text = str(text_or_path)
        if "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
        rep = cls()
        for rec in csv.DictReader(io.StringIO(text)):
            rep.add(rec["method"], rec["metric"], float(rec["value"]))
            rep.sample_count = int(rec["samples"])
            rep.fingerprint = rec["fingerprint"]
        return rep

    def merge(self, other: "EvalReport") -> "EvalReport":
        out = EvalReport({k: dict(v) for k, v in self.rows.items()},
                         self.sample_count + other.sample_count,
                         "+".join(f for f in (self.fingerprint, other.fingerprint) if f))
        for method, row in other.rows.items():
            for col, val in row.items():
                out.add(method, col, val)
        return out

    def to_table(self, precision: int = 4) -> str:
        cols = self.columns
        header = ["method"] + cols
        lines = [header]
        for method, row in self.rows.items():
            lines.append([method] + [f"{row[c]:.{precision}f}" if c in row else "-" for c in cols])
        widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
        fmt = lambda r: "  ".join(s.ljust(w) if i == 0 else s.rjust(w) for i, (s, w) in enumerate(zip(r, widths)))
        out = [fmt(lines[0]), "  ".join("-" * w for w in widths)]
        out += [fmt(r) for r in lines[1:]]
        return "\n".join(out)
