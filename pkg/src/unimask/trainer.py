"""Masked-reconstruction loss, Adam, and the (curriculum) training loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numkit as nk
from .kinematics import ORTHO6D, POSITION3, SkeletonTopology
from .masking import MaskSpec, curriculum_p
from .metrics import masked_mpjpe
from .model import UniMaskM, save_checkpoint
from .numkit import Tensor

log = logging.getLogger(__name__)


class DegenerateLossError(ValueError):
    """The mask hides nothing, so there is nothing to reconstruct."""


class NumericalError(RuntimeError):
    def __init__(self, step: int, lr: float, grad_norm: float):
        self.step, self.lr, self.grad_norm = step, lr, grad_norm
        super().__init__(f"non-finite loss at step {step} (lr={lr:g}, grad-norm={grad_norm:g})")


# -- loss ------------------------------------------------------------------
def masked_loss(pred, target, visibility, kind: str = "l1") -> Tensor:
    """Mean L1 (or squared) error over hidden entries only."""
    target = np.asarray(target, dtype=np.float64)
    hidden = ~np.asarray(visibility, dtype=bool)
    count = int(hidden.sum()) * target.shape[-1]
    if count == 0:
        raise DegenerateLossError("all entries are visible; nothing to score")
    weight = np.broadcast_to(hidden[..., None], target.shape).astype(np.float64)
    diff = nk.sub(pred, target)
    if kind == "l1":
        err = nk.tabs(diff)
    elif kind == "l2":
        err = nk.square(diff)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return nk.tsum(nk.mul(err, weight)) * (1.0 / count)


def _rot6d_to_matrix_t(r6: Tensor) -> Tensor:
    """Differentiable Gram-Schmidt of ortho-6D vectors ``(..., 6) -> (..., 3, 3)``."""
    a1, a2 = r6[..., 0:3], r6[..., 3:6]
    b1 = a1 / nk.sqrt(nk.tsum(a1 * a1, axis=-1, keepdims=True))
    u = a2 - nk.tsum(b1 * a2, axis=-1, keepdims=True) * b1
    b2 = u / nk.sqrt(nk.tsum(u * u, axis=-1, keepdims=True))
    x1, y1, z1 = b1[..., 0:1], b1[..., 1:2], b1[..., 2:3]
    x2, y2, z2 = b2[..., 0:1], b2[..., 1:2], b2[..., 2:3]
    b3 = nk.concat([y1 * z2 - z1 * y2, z1 * x2 - x1 * z2, x1 * y2 - y1 * x2], axis=-1)
    return nk.stack([b1, b2, b3], axis=-1)


def fk_positions_t(topology: SkeletonTopology, r6: Tensor) -> Tensor:
    """Differentiable forward kinematics of ``(..., J, 6)`` rotations, root at the origin."""
    R = _rot6d_to_matrix_t(r6)
    J = topology.num_joints
    glob = [R[..., 0, :, :]]
    pos = [Tensor(np.zeros(r6.shape[:-2] + (3,)))]
    for j in range(1, J):
        p = topology.parents[j]
        glob.append(nk.matmul(glob[p], R[..., j, :, :]))
        off = topology.offsets[j].reshape(3, 1)
        pos.append(pos[p] + nk.matmul(glob[p], off)[..., 0])
    return nk.stack(pos, axis=-2)


def loss(pred, target, visibility, kind: str = "l1", topology: SkeletonTopology | None = None,
         repr: str = POSITION3, fk_weight: float = 0.0) -> Tensor:
    """Masked reconstruction loss, plus an FK position term for ortho-6D data."""
    total = masked_loss(pred, target, visibility, kind)
    if fk_weight > 0 and repr == ORTHO6D and topology is not None:
        pred_pos = fk_positions_t(topology, nk.as_tensor(pred))
        with nk.no_grad():
            true_pos = fk_positions_t(topology, Tensor(target)).data
        total = total + fk_weight * masked_loss(pred_pos, true_pos, visibility, kind)
    return total


# -- optimiser -------------------------------------------------------------
class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 3e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def grad_norm(self) -> float:
        sq = sum(float(np.sum(p.grad * p.grad)) for p in self.params.values() if p.grad is not None)
        return math.sqrt(sq)

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            if lr == 0.0:
                continue
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}


# -- data ------------------------------------------------------------------
class WindowSampler:
    """Uniformly sampled fixed-length windows from a set of motions."""

    def __init__(self, motions: Sequence[np.ndarray], window: int):
        self.motions = [np.asarray(m, dtype=np.float64) for m in motions]
        self.window = window
        self.starts = [m.shape[0] - window + 1 for m in self.motions]
        if any(s < 1 for s in self.starts):
            raise ValueError(f"every motion must have at least {window} frames")

    def sample(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.motions), size=batch)
        out = []
        for i in idx:
            s = int(rng.integers(0, self.starts[i]))
            out.append(self.motions[i][s:s + self.window])
        return np.stack(out)

    def all_windows(self, stride: int | None = None) -> np.ndarray:
        """Deterministic windows, ``stride`` frames apart (one per motion by default)."""
        out = []
        for m, n_start in zip(self.motions, self.starts):
            step = stride or n_start
            for s in range(0, n_start, step):
                out.append(m[s:s + self.window])
        return np.stack(out)


# -- training --------------------------------------------------------------
@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 3e-4
    warmup_steps: int = 100
    seed: int = 0
    mask: MaskSpec = field(default_factory=MaskSpec)
    curriculum: tuple[float, float] | None = None
    loss: str = "l1"
    fk_weight: float = 0.0
    weight_decay: float = 0.0
    eval_every: int = 100
    checkpoint_dir: str | None = None
    curve_path: str | None = None

    def __post_init__(self):
        if isinstance(self.mask, dict):
            self.mask = MaskSpec(**self.mask)
        if self.curriculum is not None:
            lo, hi = self.curriculum
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"curriculum bounds must satisfy 0 <= start <= end <= 1, got {self.curriculum}")
            self.curriculum = (float(lo), float(hi))
        if self.lr < 0 or self.steps < 0 or self.batch_size < 1:
            raise ValueError("lr must be >= 0, steps >= 0 and batch_size >= 1")

    def lr_at(self, step: int) -> float:
        if self.warmup_steps > 0 and step < self.warmup_steps:
            return self.lr * (step + 1) / self.warmup_steps
        return self.lr

    def p_at(self, step: int) -> float:
        if self.curriculum is None:
            return self.mask.p
        return curriculum_p(step, max(self.steps - 1, 1), *self.curriculum)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mask"] = self.mask.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        d = dict(d)
        if "curriculum" in d and d["curriculum"] is not None:
            d["curriculum"] = tuple(d["curriculum"])
        return cls(**d)


@dataclass
class TrainResult:
    curve: list[dict]
    best_eval: float | None = None
    best_path: Path | None = None
    last_path: Path | None = None

    @property
    def losses(self) -> np.ndarray:
        return np.array([r["loss"] for r in self.curve])


CURVE_FIELDS = ("step", "phase", "mask", "p_m", "lr", "loss", "eval_mpjpe")


def write_curve(rows: Sequence[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items() if k in CURVE_FIELDS})
    tmp.replace(path)


def evaluate_masked(model: UniMaskM, windows: np.ndarray, visibility: np.ndarray, batch: int = 32) -> float:
    """Mean error over hidden joints: MPJPE for positions, L1 for rotations."""
    preds = np.concatenate([model.predict(windows[i:i + batch], visibility[i:i + batch])
                            for i in range(0, len(windows), batch)])
    if model.config.repr == POSITION3:
        return masked_mpjpe(preds, windows, visibility)
    hidden = ~visibility
    return float(np.abs(preds - windows)[hidden].mean())


def train(
    model: UniMaskM,
    motions: Sequence[np.ndarray],
    config: TrainConfig,
    val_motions: Sequence[np.ndarray] | None = None,
    topology: SkeletonTopology | None = None,
    phase: str = "train",
    start_step: int = 0,
    optimizer: Adam | None = None,
) -> TrainResult:
    """Train ``model`` in place on windows drawn from ``motions``.

    Each window gets a fresh mask from ``config.mask``; with a curriculum the
    masking probability follows ``config.p_at(step)``.
    """
    window = config.mask.window_length(default=None)
    if window is None:
        raise ValueError("mask spec does not fix a window length")
    sampler = WindowSampler(motions, window)
    rng = np.random.default_rng(config.seed)
    params = model.named_parameters()
    opt = optimizer or Adam(params, config.lr, weight_decay=config.weight_decay)

    val = None
    if val_motions is not None:
        vwin = WindowSampler(val_motions, window).all_windows()
        vrng = np.random.default_rng(config.seed + 7919)
        vvis = config.mask.generate_batch(len(vwin), window, model.scheme, vrng,
                                          p=config.p_at(config.steps))
        val = (vwin, vvis)

    ckdir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    curve: list[dict] = []
    best = math.inf
    best_path = last_path = None
    for step in range(config.steps):
        p = config.p_at(step)
        x = sampler.sample(config.batch_size, rng)
        vis = config.mask.generate_batch(config.batch_size, window, model.scheme, rng, p=p)
        lr = config.lr_at(step)
        model.zero_grad()
        y = model.forward(x, vis)
        l = loss(y, x, vis, config.loss, topology, model.config.repr, config.fk_weight)
        l.backward()
        value = l.item()
        if not math.isfinite(value):
            raise NumericalError(start_step + step, lr, opt.grad_norm())
        opt.step(lr)
        row = {"step": start_step + step, "phase": phase, "mask": config.mask.kind,
               "p_m": p, "lr": lr, "loss": value, "eval_mpjpe": ""}
        last = step == config.steps - 1
        if val is not None and (last or (config.eval_every and (step + 1) % config.eval_every == 0)):
            score = evaluate_masked(model, *val)
            row["eval_mpjpe"] = score
            log.info("step %d loss %.5f eval %.5f", start_step + step, value, score)
            if score < best:
                best = score
                if ckdir is not None:
                    best_path = save_checkpoint(ckdir / "best.npz", model, topology,
                                                {"step": start_step + step, "eval": score})
        curve.append(row)
    if ckdir is not None:
        last_path = save_checkpoint(ckdir / "last.npz", model, topology,
                                    {"step": start_step + config.steps - 1})
        if best_path is None:
            best_path = last_path
    if config.curve_path:
        write_curve(curve, config.curve_path)
    return TrainResult(curve, best if math.isfinite(best) else None, best_path, last_path)


def pretrain_then_finetune(
    model: UniMaskM,
    motions: Sequence[np.ndarray],
    pretrain: TrainConfig,
    finetune: TrainConfig,
    val_motions: Sequence[np.ndarray] | None = None,
    topology: SkeletonTopology | None = None,
) -> TrainResult:
    """Two phases: ``pretrain`` masks, then ``finetune`` masks from the same weights.

    The optimiser state carries over; step numbers continue across the boundary.
    """
    opt = Adam(model.named_parameters(), pretrain.lr, weight_decay=pretrain.weight_decay)
    first = train(model, motions, pretrain, val_motions, topology, phase="pretrain", optimizer=opt)
    second = train(model, motions, finetune, val_motions, topology, phase="finetune",
                   start_step=pretrain.steps, optimizer=opt)
    curve = first.curve + second.curve
    if finetune.curve_path:
        write_curve(curve, finetune.curve_path)
    return TrainResult(curve, second.best_eval, second.best_path, second.last_path)
