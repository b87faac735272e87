"""The masked-autoencoder motion network.

Data flow for a batch ``x`` of shape ``(B, T, J, n)`` with visibility ``(B, T, J)``::

    fill -> normalise -> [DCT] -> pose decomposition -> per-patch projection
    -> + mixed embedding -> encoder -> + mixed embedding -> decoder
    -> pose aggregation -> [TempMLP] -> joint projection -> [IDCT]
    -> rescale -> + reference motion
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .. import numkit as nk
from ..kinematics import ORTHO6D, POSITION3, REPR_DIMS, SkeletonTopology, default_topology
from ..masking import patchify_mask
from ..numkit import Tensor
from ..patches import PatchScheme, custom_scheme, make_scheme
from ..pipeline import apply_delta, fill_motion
from .layers import Linear, Module, TempMLP, TransformerStack, sinusoidal_embedding, trunc_normal


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    num_joints: int = 22
    repr: str = POSITION3
    patch_scheme: str = "S3"
    scheme_groups: list | None = None
    dim: int = 64
    encoder_depth: int = 2
    decoder_depth: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    pa_hidden: int | None = None
    use_pd: bool = True
    use_pa: bool = True
    use_dct: bool = False
    use_temp_mlp: bool = False
    temp_mlp_blocks: int = 1
    seq_len: int | None = None
    use_emb_kin: bool = True
    causal_attention: bool = False
    encoder_only: bool = False
    decoder_only: bool = False
    light: bool = False
    overwrite_observed: bool = True
    fill_strategy: str = "interpolate"
    center_input: bool = True
    zero_init_output: bool = True
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.repr not in REPR_DIMS:
            raise ConfigError(f"unknown representation {self.repr!r}")
        if self.encoder_only and self.decoder_only:
            raise ConfigError("encoder_only and decoder_only cannot both be set")
        if self.encoder_depth < 0 or self.decoder_depth < 0:
            raise ConfigError("depths must be >= 0")
        if self.width % self.heads:
            raise ConfigError(f"width {self.width} is not divisible by {self.heads} heads")
        if self.use_temp_mlp and not self.seq_len:
            raise ConfigError("use_temp_mlp needs seq_len")
        if self.use_temp_mlp and not self.use_pa:
            raise ConfigError("TempMLP refines aggregated poses and needs use_pa")
        if self.causal_attention and (self.use_dct or self.use_temp_mlp):
            raise ConfigError("causal_attention cannot be combined with use_dct or use_temp_mlp (both mix frames)")
        if self.fill_strategy not in ("interpolate", "repeat_last"):
            raise ConfigError(f"unknown fill strategy {self.fill_strategy!r}")

    @property
    def width(self) -> int:
        """Token width ``D``; the light configuration halves it."""
        return self.dim // 2 if self.light else self.dim

    @property
    def n(self) -> int:
        return REPR_DIMS[self.repr]

    def resolve_scheme(self, topology: SkeletonTopology | None = None) -> PatchScheme:
        if not self.use_pd:
            return make_scheme("S2", topology or _placeholder(self.num_joints))
        if self.scheme_groups is not None:
            return custom_scheme(self.scheme_groups, self.num_joints)
        if self.patch_scheme in ("S1", "S2"):
            return make_scheme(self.patch_scheme, topology or _placeholder(self.num_joints))
        topology = topology or default_topology()
        if topology.num_joints != self.num_joints:
            raise ConfigError(
                f"patch scheme {self.patch_scheme} needs a {self.num_joints}-joint topology"
            )
        return make_scheme(self.patch_scheme, topology)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def _placeholder(J: int) -> SkeletonTopology:
    return SkeletonTopology([f"j{j}" for j in range(J)], [-1] + list(range(J - 1)), np.zeros((J, 3)))


class UniMaskM(Module):
    def __init__(self, config: ModelConfig, topology: SkeletonTopology | None = None):
        config.validate()
        self.config = config
        self.scheme = config.resolve_scheme(topology)
        rng = np.random.default_rng(config.seed)
        D, n, L = config.width, config.n, self.scheme.num_patches
        self._groups = [list(g) for g in self.scheme.groups]

        self.patch_embed = [Linear(len(g) * n, D, rng) for g in self._groups]
        self.emb_kin = Tensor(trunc_normal(rng, (L, D)), requires_grad=True)
        self.emb_mask = Tensor(trunc_normal(rng, (D,)), requires_grad=True)

        has_encoder = not config.decoder_only and config.encoder_depth > 0
        has_decoder = not config.encoder_only and config.decoder_depth > 0
        if not (has_encoder or has_decoder):
            raise ConfigError("the model needs at least one of encoder or decoder")
        self.encoder = TransformerStack(config.encoder_depth, D, config.heads, config.mlp_ratio, rng) \
            if has_encoder else None
        self.decoder = TransformerStack(config.decoder_depth, D, config.heads, config.mlp_ratio, rng) \
            if has_decoder else None

        P = config.num_joints * n
        zero = config.zero_init_output
        if config.use_pa:
            hidden = config.pa_hidden or D
            self.pa_fc1 = Linear(L * D, hidden, rng)
            self.pa_fc2 = Linear(hidden, D, rng)
            self.temp_mlp = TempMLP(config.seq_len, D, config.temp_mlp_blocks) if config.use_temp_mlp else None
            self.head = Linear(D, P, rng, zero=zero)
        else:
            self.patch_heads = [Linear(D, len(g) * n, rng, zero=zero) for g in self._groups]
            self._inverse_perm = np.argsort(self.scheme.permutation)

        # Normalisation statistics, set from data by the trainer; not trained.
        self.input_mean = Tensor(np.zeros(n))
        self.input_std = Tensor(np.ones(n))

    # -- state -------------------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        state = {k: v.data for k, v in self.named_parameters().items()}
        state["input_mean"] = self.input_mean.data
        state["input_std"] = self.input_std.data
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        targets = dict(self.named_parameters())
        targets["input_mean"] = self.input_mean
        targets["input_std"] = self.input_std
        missing = set(targets) - set(state)
        extra = set(state) - set(targets)
        if missing or extra:
            raise KeyError(f"state mismatch; missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, t in targets.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"{k}: shape {arr.shape} != {t.shape}")
            t.data = arr.copy()

    def set_normalization(self, x: np.ndarray) -> None:
        """Per-channel statistics of (centred) training motions ``(..., T, J, n)``."""
        x = np.asarray(x, dtype=np.float64)
        if self.config.center_input and self.config.repr == POSITION3:
            x = x - x.mean(axis=(-3, -2), keepdims=True)
        flat = x.reshape(-1, x.shape[-1])
        self.input_mean = Tensor(flat.mean(axis=0) if self.config.repr == ORTHO6D else np.zeros(x.shape[-1]))
        std = flat.std(axis=0)
        self.input_std = Tensor(np.where(std > 1e-8, std, 1.0))

    # -- pieces ------------------------------------------------------------
    def pose_decompose(self, x: np.ndarray) -> list[np.ndarray]:
        return pose_decompose(x, self.scheme)

    def project_tokens(self, patches) -> Tensor:
        """Per-patch linear maps, stacked to ``(B, T, L, D)``."""
        return nk.stack([emb(p) for emb, p in zip(self.patch_embed, patches)], axis=2)

    def mixed_embedding(self, token_hidden: np.ndarray, T: int) -> Tensor:
        """``(B, T, L, D)`` sum of positional, kinematic and mask embeddings."""
        D = self.config.width
        L = self.scheme.num_patches
        emb = Tensor(np.broadcast_to(sinusoidal_embedding(T, D)[:, None, :], (T, L, D)))
        if self.config.use_emb_kin:
            emb = emb + self.emb_kin
        hidden = token_hidden.reshape(token_hidden.shape[0], T, L, 1).astype(np.float64)
        return emb + nk.mul(hidden, self.emb_mask)

    def attention_allow(self, T: int) -> np.ndarray | None:
        if not self.config.causal_attention:
            return None
        frame = np.repeat(np.arange(T), self.scheme.num_patches)
        return frame[None, :] <= frame[:, None]

    def encode_decode(self, tokens: Tensor, emb_mix: Tensor, allow=None) -> Tensor:
        """Run the full ``L*T`` token sequence through encoder and decoder."""
        x = tokens + emb_mix
        if self.encoder is not None:
            x = self.encoder(x, allow)
            if self.decoder is not None:
                x = x + emb_mix
        if self.decoder is not None:
            x = self.decoder(x, allow)
        return x

    def pose_aggregate(self, decoded: Tensor, T: int) -> Tensor:
        """``(B, L*T, D)`` tokens -> ``(B, T, J*n)`` joint-space output."""
        B = decoded.shape[0]
        L, D = self.scheme.num_patches, self.config.width
        if self.config.use_pa:
            e = decoded.reshape(B, T, L * D)
            e = nk.gelu(self.pa_fc2(nk.gelu(self.pa_fc1(e))))
            if self.temp_mlp is not None:
                e = self.temp_mlp(e)
            return self.head(e)
        e = decoded.reshape(B, T, L, D)
        n = self.config.n
        parts = [head(e[:, :, l, :]) for l, head in enumerate(self.patch_heads)]
        out = nk.concat(parts, axis=-1).reshape(B, T, self.config.num_joints, n)
        return out[:, :, self._inverse_perm, :].reshape(B, T, -1)

    # -- forward -----------------------------------------------------------
    def network_input(self, x_fill: np.ndarray) -> np.ndarray:
        x = x_fill
        if self.config.center_input and self.config.repr == POSITION3:
            x = x - x.mean(axis=(-3, -2), keepdims=True)
        return (x - self.input_mean.data) / self.input_std.data

    def delta(self, x_in: np.ndarray, visibility: np.ndarray) -> Tensor:
        """Network output ``f(X_fill)`` in data units, ``(B, T, J, n)``."""
        B, T, J, n = x_in.shape
        if J != self.config.num_joints or n != self.config.n:
            raise ValueError(f"model expects J={self.config.num_joints}, n={self.config.n}; got {x_in.shape}")
        if self.config.use_dct:
            x_in = nk.dct(x_in, axis=1)
        patches = self.pose_decompose(x_in)
        tokens = self.project_tokens(patches)
        hidden = ~patchify_mask(visibility, self.scheme)
        emb_mix = self.mixed_embedding(hidden, T)
        L, D = self.scheme.num_patches, self.config.width
        decoded = self.encode_decode(
            tokens.reshape(B, T * L, D), emb_mix.reshape(B, T * L, D), self.attention_allow(T)
        )
        out = self.pose_aggregate(decoded, T)
        if self.config.use_dct:
            out = nk.idct(out, axis=1)
        return out.reshape(B, T, J, n) * self.input_std

    def forward(self, x: np.ndarray, visibility: np.ndarray) -> Tensor:
        """Predicted motion ``Y`` for a batch ``(B, T, J, n)`` (or a single ``(T, J, n)``)."""
        x = np.asarray(x, dtype=np.float64)
        vis = np.asarray(visibility, dtype=bool)
        single = x.ndim == 3
        if single:
            x, vis = x[None], vis[None]
        filled = fill_motion(x, vis, self.config.fill_strategy, self.config.repr, allow_unobserved=True)
        net = self.delta(self.network_input(filled.x_fill), vis)
        y = apply_delta(net, filled.x_ref, vis if self.config.overwrite_observed else None, observed=x)
        return y[0] if single else y

    __call__ = forward

    def predict(self, x: np.ndarray, visibility: np.ndarray) -> np.ndarray:
        with nk.no_grad():
            return self.forward(x, visibility).data


def pose_decompose(x, scheme: PatchScheme) -> list:
    """Split ``(..., T, J, n)`` into per-patch arrays ``(..., T, n_l * n)``."""
    lead = x.shape[:-2]
    out = []
    for g in scheme.groups:
        part = x[..., list(g), :]
        out.append(part.reshape(lead + (len(g) * x.shape[-1],)))
    return out


def pose_regroup(patches, scheme: PatchScheme, n: int) -> np.ndarray:
    """Inverse of :func:`pose_decompose` for ndarrays."""
    lead = patches[0].shape[:-1]
    out = np.empty(lead + (scheme.num_joints, n))
    for g, p in zip(scheme.groups, patches):
        out[..., list(g), :] = np.asarray(p).reshape(lead + (len(g), n))
    return out


def count_parameters(config: ModelConfig) -> int:
    return UniMaskM(config).num_parameters()


def match_parameter_budget(reference: ModelConfig, other: ModelConfig) -> ModelConfig:
    """Copy of ``other`` whose aggregation width brings its size closest to ``reference``.

    The parameter count is affine in ``pa_hidden``, so two probes pin it down.
    """
    if not other.use_pa:
        return other
    target = count_parameters(reference)
    base = ModelConfig(**{**other.to_dict(), "pa_hidden": 1})
    c1 = count_parameters(base)
    slope = count_parameters(ModelConfig(**{**other.to_dict(), "pa_hidden": 2})) - c1
    hidden = max(1, int(round(1 + (target - c1) / slope)))
    return ModelConfig(**{**other.to_dict(), "pa_hidden": hidden})
