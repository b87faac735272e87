"""Visibility masks that turn every synthesis task into reconstruction.

Convention throughout the package: ``True`` = visible/observed,
``False`` = hidden/to be reconstructed.  Joint-level masks have shape
``(T, J)``; token masks are flat ``(T * L,)`` in frame-major order.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from .patches import PatchScheme

Seed = Union[int, np.random.Generator, None]

KINDS = ("forecast", "inbetween", "completion", "occlusion", "custom")


class MaskParameterError(ValueError):
    pass


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_forecast_mask(T: int, T_obs: int, J: int = 22) -> np.ndarray:
    """Frames ``[0, T_obs)`` visible, the rest hidden."""
    if not 1 <= T_obs < T:
        raise MaskParameterError(f"need 1 <= T_obs < T, got T_obs={T_obs}, T={T}")
    vis = np.zeros((T, J), dtype=bool)
    vis[:T_obs] = True
    return vis


def gen_inbetween_mask(T: int, past: int, transition: int, future: int, J: int = 22) -> np.ndarray:
    """Key poses at both ends, ``transition`` hidden frames between them.

    ``future=0`` is allowed and reduces to a forecast mask.
    """
    if past < 1 or transition < 1 or future < 0:
        raise MaskParameterError(
            f"need past >= 1, transition >= 1, future >= 0; got {past}, {transition}, {future}"
        )
    if past + transition + future != T:
        raise MaskParameterError(
            f"past + transition + future = {past + transition + future} does not equal T = {T}"
        )
    vis = np.ones((T, J), dtype=bool)
    vis[past:past + transition] = False
    return vis


def _patch_groups(scheme_or_J: PatchScheme | int) -> tuple[np.ndarray, int]:
    if isinstance(scheme_or_J, PatchScheme):
        return scheme_or_J.joint_to_patch, scheme_or_J.num_patches
    J = int(scheme_or_J)
    return np.arange(J), J


def _check_prob(p: float, name: str) -> None:
    if not 0.0 <= p <= 1.0:
        raise MaskParameterError(f"{name} must lie in [0, 1], got {p}")


def gen_completion_mask(
    T: int, scheme: PatchScheme | int, p_m: float, T_obs: int, seed: Seed = None
) -> np.ndarray:
    """Hide each patch of each frame at or after ``T_obs`` with probability ``p_m``.

    ``scheme`` may be a plain joint count, in which case every joint is its own
    patch.  Frames before ``T_obs`` stay fully visible.
    """
    _check_prob(p_m, "p_m")
    if not 0 <= T_obs <= T:
        raise MaskParameterError(f"need 0 <= T_obs <= T, got T_obs={T_obs}, T={T}")
    j2p, L = _patch_groups(scheme)
    hidden_patch = np.zeros((T, L), dtype=bool)
    hidden_patch[T_obs:] = _rng(seed).random((T - T_obs, L)) < p_m
    return ~hidden_patch[:, j2p]


def gen_occlusion_mask(T: int, T_obs: int, J: int, p: float, seed: Seed = None) -> np.ndarray:
    """Forecast mask whose observed joints are each dropped with probability ``p``."""
    _check_prob(p, "p")
    vis = gen_forecast_mask(T, T_obs, J)
    vis[:T_obs] = _rng(seed).random((T_obs, J)) >= p
    return vis


def patchify_mask(visibility: np.ndarray, scheme: PatchScheme) -> np.ndarray:
    """Token mask from a joint mask: a token is visible iff all its joints are.

    Accepts ``(..., T, J)`` and returns ``(..., T * L)`` in frame-major order.
    """
    vis = np.asarray(visibility, dtype=bool)
    if vis.shape[-1] != scheme.num_joints:
        raise ValueError(
            f"mask covers {vis.shape[-1]} joints but the scheme covers {scheme.num_joints}"
        )
    tokens = np.stack([vis[..., list(g)].all(axis=-1) for g in scheme.groups], axis=-1)
    return tokens.reshape(vis.shape[:-2] + (-1,))


def curriculum_p(step: int, total_steps: int, p_start: float = 0.85, p_end: float = 1.0) -> float:
    """Masking probability growing linearly from ``p_start`` to ``p_end``."""
    if not 0.0 <= p_start <= p_end <= 1.0:
        raise MaskParameterError(f"need 0 <= p_start <= p_end <= 1, got {p_start}, {p_end}")
    if total_steps <= 0:
        return p_end
    frac = min(max(step / total_steps, 0.0), 1.0)
    return p_start + (p_end - p_start) * frac


@dataclass
class MaskSpec:
    """Which masking pattern to draw and its parameters."""

    kind: str = "inbetween"
    t_obs: int = 10
    horizon: int = 25
    past: int = 10
    transition: int = 15
    future: int = 1
    p: float = 0.0
    seed: int | None = None
    visibility: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MaskParameterError(f"unknown mask kind {self.kind!r}; expected one of {KINDS}")
        _check_prob(self.p, "p")

    def window_length(self, default: int | None = None) -> int | None:
        """Sequence length implied by the spec, if any."""
        if self.kind == "inbetween":
            return self.past + self.transition + self.future
        if self.kind == "custom":
            return self.visibility.shape[0] if self.visibility is not None else default
        return self.t_obs + self.horizon

    def generate(self, T: int, scheme: PatchScheme, seed: Seed = None, p: float | None = None) -> np.ndarray:
        """Draw one ``(T, J)`` mask; ``p`` overrides the spec probability."""
        J = scheme.num_joints
        rng = _rng(self.seed if seed is None else seed)
        prob = self.p if p is None else p
        if self.kind == "forecast":
            return gen_forecast_mask(T, self.t_obs, J)
        if self.kind == "inbetween":
            return gen_inbetween_mask(T, self.past, self.transition, self.future, J)
        if self.kind == "completion":
            return gen_completion_mask(T, scheme, prob, self.t_obs, rng)
        if self.kind == "occlusion":
            return gen_occlusion_mask(T, self.t_obs, J, prob, rng)
        if self.visibility is None:
            raise MaskParameterError("a custom mask spec needs an explicit visibility array")
        vis = np.asarray(self.visibility, dtype=bool)
        if vis.shape != (T, J):
            raise MaskParameterError(f"custom visibility shape {vis.shape} != {(T, J)}")
        return vis.copy()

    def generate_batch(self, B: int, T: int, scheme: PatchScheme, seed: Seed = None,
                       p: float | None = None) -> np.ndarray:
        rng = _rng(self.seed if seed is None else seed)
        return np.stack([self.generate(T, scheme, rng, p) for _ in range(B)])

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("visibility")
        return d
