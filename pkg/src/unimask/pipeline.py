"""Input conditioning around the network: fill, reference motion, delta output.

Arrays are ``(..., T, J, n)`` with visibility ``(..., T, J)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import numkit as nk
from .kinematics import ORTHO6D, POSITION3, quaternion_to_rot6d, rot6d_to_quaternion, slerp

STRATEGIES = ("interpolate", "repeat_last")


class UnfillableChannelError(ValueError):
    """A joint has no visible frame to fill from."""

    def __init__(self, joints):
        self.joints = sorted(set(int(j) for j in joints))
        super().__init__(f"joint channel(s) {self.joints} have no visible frame")


@dataclass
class FilledMotion:
    x_fill: np.ndarray
    x_ref: np.ndarray
    visibility: np.ndarray


def _bracket(vis_jt: np.ndarray, strategy: str):
    """Previous/next visible frame index and blend weight for every (.., j, t)."""
    T = vis_jt.shape[-1]
    t = np.arange(T)
    prev = np.maximum.accumulate(np.where(vis_jt, t, -1), axis=-1)
    nxt = np.flip(np.minimum.accumulate(np.flip(np.where(vis_jt, t, T), -1), axis=-1), -1)
    before = prev < 0
    after = nxt >= T
    if strategy == "repeat_last":
        nxt = np.where(before, nxt, prev)
        prev = np.where(before, nxt, prev)
        return prev, nxt, np.zeros(prev.shape)
    prev = np.where(before, nxt, prev)
    nxt = np.where(after, prev, nxt)
    span = nxt - prev
    w = np.where(span > 0, (t - prev) / np.where(span > 0, span, 1), 0.0)
    return prev, nxt, w


def fill_motion(
    x: np.ndarray,
    visibility: np.ndarray,
    strategy: str = "interpolate",
    repr: str = POSITION3,
    allow_unobserved: bool = False,
) -> FilledMotion:
    """Fill hidden entries of every joint channel from its visible frames.

    ``interpolate`` blends linearly (positions) or with SLERP (ortho-6D) between
    the bracketing visible frames, holds the last visible value past the end and
    back-fills before the first.  ``repeat_last`` holds the last visible value
    everywhere.  With ``allow_unobserved`` a channel with no visible frame takes
    the per-frame mean of the other joints (positions) or the identity rotation.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown fill strategy {strategy!r}")
    x = np.asarray(x, dtype=np.float64)
    vis = np.asarray(visibility, dtype=bool)
    if vis.shape != x.shape[:-1]:
        raise ValueError(f"visibility shape {vis.shape} does not match motion {x.shape}")
    vis_jt = np.swapaxes(vis, -1, -2)
    empty = ~vis_jt.any(axis=-1)
    if empty.any() and not allow_unobserved:
        raise UnfillableChannelError(np.nonzero(empty)[-1])

    prev, nxt, w = _bracket(vis_jt, strategy)
    prev = np.clip(np.swapaxes(prev, -1, -2), 0, x.shape[-3] - 1)
    nxt = np.clip(np.swapaxes(nxt, -1, -2), 0, x.shape[-3] - 1)
    w = np.swapaxes(w, -1, -2)[..., None]
    a = np.take_along_axis(x, prev[..., None], axis=-3)
    b = np.take_along_axis(x, nxt[..., None], axis=-3)
    if repr == ORTHO6D:
        blend = w[..., 0] > 0
        out = a.copy()
        if blend.any():
            qa = rot6d_to_quaternion(a[blend])
            qb = rot6d_to_quaternion(b[blend])
            out[blend] = quaternion_to_rot6d(slerp(qa, qb, w[blend][..., 0]))
    else:
        out = a + w * (b - a)
    out = np.where(vis[..., None], x, out)

    if empty.any():
        empty_tj = np.broadcast_to(empty[..., None, :], vis.shape)
        if repr == ORTHO6D:
            ident = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
            out = np.where(empty_tj[..., None], ident, out)
        else:
            keep = ~empty_tj[..., None]
            count = keep.sum(axis=-2, keepdims=True)
            mean = np.where(count > 0, (out * keep).sum(axis=-2, keepdims=True) / np.maximum(count, 1), 0.0)
            out = np.where(keep, out, mean)
    return FilledMotion(out, build_reference(out), vis)


def build_reference(x_fill, reference_fn: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Reference motion for the delta output; the filled motion unless a hook is given."""
    if isinstance(x_fill, FilledMotion):
        x_fill = x_fill.x_fill
    if reference_fn is not None:
        return np.asarray(reference_fn(x_fill), dtype=np.float64)
    return np.array(x_fill, dtype=np.float64, copy=True)


def apply_delta(net_output, x_ref, visibility=None, observed=None):
    """``Y = net_output + x_ref``, then observed entries are reset to ``observed``.

    Works on ndarrays or tensors; with ``visibility=None`` nothing is overwritten.
    """
    x_ref_shape = np.shape(x_ref.data if isinstance(x_ref, nk.Tensor) else x_ref)
    if tuple(net_output.shape) != tuple(x_ref_shape):
        raise ValueError(f"delta shape {tuple(net_output.shape)} != reference shape {x_ref_shape}")
    y = nk.add(net_output, x_ref) if isinstance(net_output, nk.Tensor) else np.asarray(net_output) + x_ref
    if visibility is None:
        return y
    if observed is None:
        observed = x_ref
    vis = np.asarray(visibility, dtype=bool)[..., None]
    if isinstance(y, nk.Tensor):
        obs = observed if isinstance(observed, nk.Tensor) else np.asarray(observed, dtype=np.float64)
        return nk.where(vis, obs, y)
    return np.where(vis, observed, y)


def dct_wrap(x, time_axis: int = -3):
    """DCT along the time axis of a ``(..., T, J, n)`` motion (or any tensor)."""
    return nk.dct(x, axis=time_axis)


def idct_unwrap(x, time_axis: int = -3):
    return nk.idct(x, axis=time_axis)
