import threading

import numpy as np
import pytest

from unimask import numkit as nk
from unimask.kinematics import ORTHO6D, default_topology, quaternion_to_rot6d
from unimask.masking import MaskSpec, patchify_mask
from unimask.model import (
    ConfigError,
    ModelConfig,
    TempMLP,
    UniMaskM,
    count_parameters,
    load_checkpoint,
    match_parameter_budget,
    pose_decompose,
    pose_regroup,
    save_checkpoint,
    sinusoidal_embedding,
)
from unimask.model.layers import Attention
from unimask.patches import make_scheme
from unimask.pipeline import fill_motion

TOPO = default_topology()


def small(**kw) -> ModelConfig:
    base = dict(dim=16, encoder_depth=1, decoder_depth=1, heads=2, zero_init_output=False, seed=3)
    base.update(kw)
    return ModelConfig(**base)


def motion(rng, B=2, T=6, n=3):
    return rng.normal(size=(B, T, 22, n))


# -- pose decomposition ----------------------------------------------------
def test_pose_decompose_lengths():
    x = np.zeros((4, 22, 3))
    assert [p.shape[-1] for p in pose_decompose(x, make_scheme("S3", TOPO))] == [18, 12, 12, 12, 12]
    parts = pose_decompose(x, make_scheme("S2", TOPO))
    assert len(parts) == 1 and parts[0].shape == (4, 66)


@pytest.mark.parametrize("variant", ["S1", "S2", "S3", "S4", "S5"])
def test_regroup_inverts_decompose(variant):
    scheme = make_scheme(variant, TOPO)
    x = np.random.default_rng(0).normal(size=(2, 5, 22, 3))
    np.testing.assert_array_equal(pose_regroup(pose_decompose(x, scheme), scheme, 3), x)


def test_token_count_and_locality():
    rng = np.random.default_rng(1)
    m = UniMaskM(small())
    x = motion(rng, B=1, T=4)
    base = m.project_tokens(m.pose_decompose(x)).data
    assert base.shape == (1, 4, 5, 16)
    g = list(m.scheme.groups[2])
    x2 = x.copy()
    x2[0, 1, g[0]] += 1.0
    diff = np.abs(m.project_tokens(m.pose_decompose(x2)).data - base).sum(-1)[0]
    assert diff[1, 2] > 0
    diff[1, 2] = 0
    assert not diff.any()


# -- embeddings ------------------------------------------------------------
def test_positional_embedding_at_zero():
    pe = sinusoidal_embedding(3, 8)
    np.testing.assert_array_equal(pe[0], [0, 1, 0, 1, 0, 1, 0, 1])
    np.testing.assert_allclose(pe[1, :2], [np.sin(1.0), np.cos(1.0)])


def test_mask_embedding_is_added_to_hidden_tokens_only():
    m = UniMaskM(small())
    hidden = np.zeros((1, 3 * 5), bool)
    hidden[0, [1, 7]] = True
    diff = (m.mixed_embedding(hidden, 3).data - m.mixed_embedding(np.zeros_like(hidden), 3).data)[0]
    diff = diff.reshape(15, 16)
    np.testing.assert_allclose(diff[[1, 7]], np.tile(m.emb_mask.data, (2, 1)), atol=1e-15)
    assert not np.delete(diff, [1, 7], axis=0).any()


def test_kinematic_embedding_separates_patches():
    m = UniMaskM(small())
    e = m.mixed_embedding(np.zeros((1, 10), bool), 2).data[0]
    np.testing.assert_allclose(e[0, 1] - e[0, 3], m.emb_kin.data[1] - m.emb_kin.data[3], atol=1e-15)
    flat = UniMaskM(small(use_emb_kin=False)).mixed_embedding(np.zeros((1, 10), bool), 2).data[0]
    assert np.array_equal(flat[0, 1], flat[0, 3])


# -- attention -------------------------------------------------------------
def test_two_token_attention_oracle():
    rng = np.random.default_rng(2)
    att = Attention(2, 1, rng)
    Wq, Wk, Wv = np.eye(2), np.array([[1.0, 0], [0, 2]]), np.array([[0.0, 1], [1, 0]])
    att.qkv.weight.data = np.concatenate([Wq, Wk, Wv], axis=1)
    att.qkv.bias.data = np.zeros(6)
    att.proj.weight.data = np.eye(2)
    att.proj.bias.data = np.zeros(2)
    x = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    # q0.k0 = 1, q0.k1 = 0, q1.k0 = 0, q1.k1 = 2, scaled by 1/sqrt(2)
    s = np.array([[1.0, 0.0], [0.0, 2.0]]) / np.sqrt(2)
    a = np.exp(s) / np.exp(s).sum(axis=1, keepdims=True)
    v = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(att(nk.Tensor(x)).data[0], a @ v, atol=1e-15)
    causal = np.array([[True, False], [True, True]])
    out = att(nk.Tensor(x), causal).data[0]
    np.testing.assert_allclose(out[0], v[0], atol=1e-15)
    np.testing.assert_allclose(out[1], a[1] @ v, atol=1e-15)


def test_causal_network_ignores_the_future():
    rng = np.random.default_rng(3)
    m = UniMaskM(small(causal_attention=True))
    x = motion(rng, B=1, T=6)
    vis = np.ones((1, 6, 22), bool)
    with nk.no_grad():
        base = m.delta(x, vis).data
        for t in range(1, 6):
            x2 = x.copy()
            x2[:, t:] += rng.normal(size=x2[:, t:].shape)
            out = m.delta(x2, vis).data
            assert np.abs(out[:, :t] - base[:, :t]).max() <= 1e-12
            assert np.abs(out[:, t:] - base[:, t:]).max() > 1e-6


# -- pose aggregation and TempMLP ------------------------------------------
def test_pose_aggregation_shape_and_frame_locality():
    m = UniMaskM(small(dim=8, heads=2))
    rng = np.random.default_rng(4)
    tokens = rng.normal(size=(2, 4 * 5, 8))
    out = m.pose_aggregate(nk.Tensor(tokens), 4).data
    assert out.shape == (2, 4, 66)
    tokens[:, 2 * 5 + 3] += 1.0
    diff = np.abs(m.pose_aggregate(nk.Tensor(tokens), 4).data - out).sum(-1)
    assert diff[:, 2].min() > 0
    assert not np.delete(diff, 2, axis=1).any()


def test_without_aggregation_patches_map_back_to_their_joints():
    m = UniMaskM(small(use_pa=False))
    rng = np.random.default_rng(5)
    tokens = rng.normal(size=(1, 3 * 5, 16))
    base = m.pose_aggregate(nk.Tensor(tokens), 3).data.reshape(3, 22, 3)
    tokens[0, 5 + 4] += 1.0
    diff = np.abs(m.pose_aggregate(nk.Tensor(tokens), 3).data.reshape(3, 22, 3) - base).sum(-1)
    touched = np.zeros((3, 22), bool)
    touched[1, list(m.scheme.groups[4])] = True
    assert (diff[touched] > 0).all() and not diff[~touched].any()


def test_temp_mlp_starts_as_identity():
    x = np.random.default_rng(6).normal(size=(2, 5, 4))
    np.testing.assert_array_equal(TempMLP(5, 4, 2)(nk.Tensor(x)).data, x)


def test_temp_mlp_hand_weights():
    mlp = TempMLP(2, 2, 1)
    mlp.mix[0].weight.data = np.array([[0.0, 1.0], [0.0, 0.0]])
    mlp.mix[0].bias.data = np.array([[0.5], [0.0]])
    x = np.array([[[1.0, 3.0], [2.0, 6.0]]])
    ln1 = np.array([-2.0, 2.0]) / np.sqrt(4.0 + 1e-5)   # frame 1 has mean 4, variance 4
    want = x.copy()
    want[0, 0] += ln1 + 0.5
    np.testing.assert_allclose(mlp(nk.Tensor(x)).data, want, atol=1e-15)
    with pytest.raises(ValueError):
        mlp(nk.Tensor(np.zeros((1, 3, 2))))


# -- delta strategy --------------------------------------------------------
@pytest.mark.parametrize("kind", ["forecast", "inbetween", "completion", "occlusion", "custom"])
def test_delta_identity(kind):
    rng = np.random.default_rng(7)
    m = UniMaskM(small())
    if kind == "custom":
        T = 20
        vis = rng.random((2, T, 22)) < 0.5
        vis[:, 0] = True
    else:
        spec = MaskSpec(kind, p=0.5)
        T = spec.window_length()
        vis = spec.generate_batch(2, T, m.scheme, seed=1)
    x = motion(rng, B=2, T=T)
    with nk.no_grad():
        y = m(x, vis).data
        filled = fill_motion(x, vis, allow_unobserved=True)
        net = m.delta(m.network_input(filled.x_fill), vis).data
    np.testing.assert_array_equal(y[vis], x[vis])
    np.testing.assert_allclose(y[~vis], (net + filled.x_fill)[~vis], atol=1e-12)
    assert np.abs(net[~vis]).max() > 1e-6


def test_fresh_model_returns_the_filled_motion():
    rng = np.random.default_rng(8)
    m = UniMaskM(ModelConfig(dim=16, encoder_depth=1, decoder_depth=1, heads=2))
    x = motion(rng, B=1, T=8)
    vis = MaskSpec("forecast", t_obs=3, horizon=5).generate_batch(1, 8, m.scheme)
    np.testing.assert_array_equal(m.predict(x, vis), fill_motion(x, vis).x_fill)


def test_single_and_batched_forward_agree():
    rng = np.random.default_rng(9)
    m = UniMaskM(small())
    x = motion(rng, B=2, T=5)
    vis = rng.random((2, 5, 22)) < 0.7
    vis[:, 0] = True
    batch = m.predict(x, vis)
    np.testing.assert_allclose(m.predict(x[1], vis[1]), batch[1], atol=1e-12)


# -- variants --------------------------------------------------------------
@pytest.mark.parametrize("kw", [
    dict(encoder_only=True), dict(decoder_only=True), dict(light=True), dict(use_dct=True),
    dict(use_temp_mlp=True, seq_len=6), dict(use_pd=False), dict(patch_scheme="S1"), dict(repr=ORTHO6D),
])
def test_variant_smoke(kw):
    rng = np.random.default_rng(10)
    m = UniMaskM(small(**kw))
    n = m.config.n
    x = motion(rng, B=2, T=6, n=3)
    if n == 6:
        q = rng.normal(size=(2, 6, 22, 4))
        x = quaternion_to_rot6d(q / np.linalg.norm(q, axis=-1, keepdims=True))
    vis = np.ones((2, 6, 22), bool)
    vis[:, 3:] = False
    y = m(x, vis)
    assert y.shape == x.shape and np.all(np.isfinite(y.data))
    y.sum().backward()
    assert all(p.grad is not None for p in m.parameters())


def test_light_halves_the_width():
    assert UniMaskM(small(light=True)).emb_mask.shape == (8,)
    assert count_parameters(small(light=True)) < count_parameters(small())


@pytest.mark.parametrize("kw", [
    dict(encoder_only=True, decoder_only=True), dict(repr="euler"), dict(dim=10, heads=4),
    dict(use_temp_mlp=True), dict(use_temp_mlp=True, seq_len=4, use_pa=False),
    dict(fill_strategy="cubic"), dict(encoder_depth=-1), dict(causal_attention=True, use_dct=True),
    dict(causal_attention=True, use_temp_mlp=True, seq_len=4),
])
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_config_rejects_unknown_keys_and_shapes():
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"dim": 8, "depth": 3})
    m = UniMaskM(small())
    with pytest.raises(ValueError):
        m.delta(np.zeros((1, 4, 21, 3)), np.ones((1, 4, 21), bool))


def test_default_size_and_budget_matching():
    ref = ModelConfig()
    assert count_parameters(ref) == 234_114
    s2 = match_parameter_budget(ref, ModelConfig(patch_scheme="S2"))
    assert s2.pa_hidden == 195
    assert abs(count_parameters(s2) - count_parameters(ref)) <= 0.001 * count_parameters(ref)


# -- checkpoints and concurrency -------------------------------------------
def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    m = UniMaskM(small(use_temp_mlp=True, seq_len=5))
    m.set_normalization(rng.normal(size=(3, 5, 22, 3)))
    path = save_checkpoint(tmp_path / "c.npz", m, TOPO, extra={"step": 7})
    back, meta = load_checkpoint(path)
    assert meta["extra"] == {"step": 7}
    a, b = m.state_dict(), back.state_dict()
    assert a.keys() == b.keys()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    x = rng.normal(size=(1, 5, 22, 3))
    vis = np.ones((1, 5, 22), bool)
    vis[:, 2:, :4] = False
    assert m.predict(x, vis).tobytes() == back.predict(x, vis).tobytes()


def test_checkpoint_rejects_foreign_files(tmp_path):
    np.savez(tmp_path / "x.npz", a=np.zeros(2))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.npz")
    m = UniMaskM(small())
    state = m.state_dict()
    state.pop("emb_mask")
    with pytest.raises(KeyError):
        m.load_state_dict(state)


def test_concurrent_inference_matches_serial():
    rng = np.random.default_rng(12)
    m = UniMaskM(small())
    inputs = [(rng.normal(size=(1, 6, 22, 3)), rng.random((1, 6, 22)) < 0.8) for _ in range(6)]
    for _, v in inputs:
        v[:, 0] = True
    serial = [m.predict(x, v) for x, v in inputs]
    results = [None] * len(inputs)

    def work(i):
        for _ in range(3):
            results[i] = m.predict(*inputs[i])

    threads = [threading.Thread(target=work, args=(i,)) for i in range(len(inputs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for a, b in zip(serial, results):
        assert a.tobytes() == b.tobytes()


def test_token_mask_matches_patchify():
    m = UniMaskM(small())
    vis = np.random.default_rng(13).random((1, 4, 22)) < 0.7
    hidden = ~patchify_mask(vis, m.scheme)
    assert hidden.shape == (1, 20)
