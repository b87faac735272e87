"""Parameter containers and transformer building blocks on top of numkit."""
from __future__ import annotations

import numpy as np

from .. import numkit as nk
from ..numkit import Tensor


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal samples redrawn until they fall within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


class Module:
    """Walks attributes to find parameters; names follow attribute paths."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, Tensor):
                if val.requires_grad:
                    out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    out.update(m.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, zero: bool = False):
        w = np.zeros((d_in, d_out)) if zero else trunc_normal(rng, (d_in, d_out))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x):
        return nk.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self._eps = eps

    def __call__(self, x):
        return nk.layer_norm(x, self.gamma, self.beta, self._eps)


class Attention(Module):
    """Multi-head self-attention; ``allow[i, j]`` says token i may attend to j."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ValueError(f"width {dim} is not divisible by {heads} heads")
        self._heads = heads
        self.qkv = Linear(dim, 3 * dim, rng)
        self.proj = Linear(dim, dim, rng)

    def __call__(self, x: Tensor, allow: np.ndarray | None = None) -> Tensor:
        B, N, D = x.shape
        H = self._heads
        dh = D // H
        qkv = self.qkv(x).reshape(B, N, 3, H, dh).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = nk.matmul(q * (1.0 / np.sqrt(dh)), k.swapaxes(-1, -2))
        attn = nk.softmax(scores, axis=-1, mask=allow)
        out = nk.matmul(attn, v).transpose(0, 2, 1, 3).reshape(B, N, D)
        return self.proj(out)


class MLP(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x):
        return self.fc2(nk.gelu(self.fc1(x)))


class Block(Module):
    """Pre-norm transformer block."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float, rng: np.random.Generator):
        self.norm1 = LayerNorm(dim)
        self.attn = Attention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.mlp = MLP(dim, int(round(dim * mlp_ratio)), rng)

    def __call__(self, x, allow=None):
        x = x + self.attn(self.norm1(x), allow)
        return x + self.mlp(self.norm2(x))


class TransformerStack(Module):
    def __init__(self, depth: int, dim: int, heads: int, mlp_ratio: float, rng: np.random.Generator):
        self.blocks = [Block(dim, heads, mlp_ratio, rng) for _ in range(depth)]
        self.norm = LayerNorm(dim)

    def __call__(self, x, allow=None):
        for blk in self.blocks:
            x = blk(x, allow)
        return self.norm(x)


class TempMLP(Module):
    """Residual blocks ``x + FC_time(LN(x))`` that mix information across frames.

    The time-mixing weights start at zero, so a fresh module is the identity.
    """

    def __init__(self, seq_len: int, dim: int, num_blocks: int):
        self.norms = [LayerNorm(dim) for _ in range(num_blocks)]
        self.mix = [TimeLinear(seq_len) for _ in range(num_blocks)]

    def __call__(self, x: Tensor) -> Tensor:
        for norm, mix in zip(self.norms, self.mix):
            x = x + mix(norm(x))
        return x


class TimeLinear(Module):
    """``y[:, t] = sum_s W[t, s] x[:, s] + b[t]`` for ``(B, T, D)`` inputs."""

    def __init__(self, seq_len: int):
        self.weight = Tensor(np.zeros((seq_len, seq_len)), requires_grad=True)
        self.bias = Tensor(np.zeros((seq_len, 1)), requires_grad=True)

    def __call__(self, x):
        if x.shape[1] != self.weight.shape[0]:
            raise ValueError(f"TempMLP built for T={self.weight.shape[0]}, got T={x.shape[1]}")
        return nk.matmul(self.weight, x) + self.bias


def sinusoidal_embedding(T: int, dim: int) -> np.ndarray:
    """Standard transformer sinusoid: sin on even dims, cos on odd dims."""
    pos = np.arange(T)[:, None]
    i = np.arange(0, dim, 2)[None, :]
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((T, dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe
