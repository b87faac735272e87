"""Orthonormal DCT-II along a chosen axis (time, in this package)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .tensor import Tensor, matmul, transpose


@lru_cache(maxsize=64)
def _dct_matrix(T: int) -> np.ndarray:
    k = np.arange(T)[:, None]
    i = np.arange(T)[None, :]
    m = np.cos(np.pi * (i + 0.5) * k / T) * np.sqrt(2.0 / T)
    m[0, :] = np.sqrt(1.0 / T)
    m.setflags(write=False)
    return m


def dct_matrix(T: int) -> np.ndarray:
    """``T x T`` orthonormal DCT-II matrix; row k holds frequency k."""
    if T < 1:
        raise ValueError(f"DCT length must be >= 1, got {T}")
    return _dct_matrix(int(T))


def _apply(m: np.ndarray, x, axis: int):
    if isinstance(x, Tensor):
        axis = axis % x.ndim
        if axis == x.ndim - 2:
            return matmul(m, x)
        perm = list(range(x.ndim))
        perm[axis], perm[-2] = perm[-2], perm[axis]
        return transpose(matmul(m, transpose(x, tuple(perm))), tuple(perm))
    x = np.asarray(x, dtype=np.float64)
    return np.moveaxis(np.tensordot(m, x, axes=([1], [axis])), 0, axis)


def dct(x, axis: int = 0):
    """Forward DCT of ``x`` (ndarray or Tensor) along ``axis``."""
    return _apply(dct_matrix(x.shape[axis]), x, axis)


def idct(x, axis: int = 0):
    """Inverse of :func:`dct`; the transpose of the DCT matrix."""
    return _apply(dct_matrix(x.shape[axis]).T, x, axis)
