import math
import warnings

import numpy as np
import pytest

from unimask.kinematics import ORTHO6D, quat_from_axis_angle, quaternion_to_rot6d, rot6d_to_quaternion
from unimask.masking import gen_forecast_mask, gen_inbetween_mask
from unimask.metrics import (
    EvalReport,
    MetricInputError,
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


# -- oracles ---------------------------------------------------------------
def mpjpe_oracle(p, t):
    N, T, J, _ = p.shape
    out = []
    for f in range(T):
        acc = 0.0
        for n in range(N):
            for j in range(J):
                acc += math.sqrt(sum((p[n, f, j, c] - t[n, f, j, c]) ** 2 for c in range(3)))
        out.append(acc / (N * J))
    return np.array(out)


def frame_l2_oracle(p, t):
    N, T = p.shape[:2]
    acc = 0.0
    for n in range(N):
        for f in range(T):
            acc += math.sqrt(float(np.sum((p[n, f] - t[n, f]) ** 2)))
    return acc / (N * T)


def npss_oracle(p, t):
    N, T, F = p.shape
    ks = np.arange(T)
    emds, weights = [], []
    for n in range(N):
        for f in range(F):
            def power(x):
                return np.array([abs(sum(x[s] * np.exp(-2j * np.pi * k * s / T) for s in range(T))) ** 2
                                 for k in ks])
            pp, tp = power(p[n, :, f]), power(t[n, :, f])
            emd = np.abs(np.cumsum(pp / pp.sum()) - np.cumsum(tp / tp.sum())).sum()
            emds.append(emd)
            weights.append(tp.sum())
    return float(np.dot(emds, weights) / np.sum(weights))


def random_unit_quats(rng, shape):
    q = rng.normal(size=shape + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


# -- MPJPE -----------------------------------------------------------------
def test_mpjpe_three_four_five():
    truth = np.zeros((1, 1, 3))
    pred = np.array([[[3.0, 4.0, 0.0]]])
    assert mpjpe(pred, truth).tolist() == [5.0]
    truth = np.zeros((2, 2, 3))
    pred = np.array([[[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]])
    assert mpjpe(pred, truth).tolist() == [2.5, 0.5]


def test_mpjpe_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        N, T, J = rng.integers(1, 4, size=3)
        p, t = rng.normal(size=(2, N, T, J, 3))
        np.testing.assert_allclose(mpjpe(p, t), mpjpe_oracle(p, t), rtol=0, atol=1e-9)


def test_mpjpe_errors_and_frames():
    with pytest.raises(MetricInputError):
        mpjpe(np.zeros((2, 3, 6)), np.zeros((2, 3, 6)))
    with pytest.raises(MetricInputError):
        mpjpe(np.zeros((2, 3, 3)), np.zeros((3, 3, 3)))
    x = np.random.default_rng(1).normal(size=(5, 4, 3))
    assert mpjpe(x + [0, 0, 2.0], x, frames=[1, 3]).tolist() == [2.0, 2.0]


def test_masked_mpjpe_scores_hidden_joints_only():
    truth = np.zeros((1, 2, 2, 3))
    pred = truth.copy()
    pred[0, 1, 0] = [0, 3.0, 4.0]
    pred[0, 0, 1] = [100.0, 0, 0]
    vis = np.array([[[True, True], [False, False]]])
    assert masked_mpjpe(pred, truth, vis) == 2.5
    with pytest.raises(MetricInputError):
        masked_mpjpe(pred, truth, np.ones((1, 2, 2), bool))


def test_horizon_frames():
    assert horizon_frames([80, 400, 1000], 25, 10) == [11, 19, 34]


# -- L2P / L2Q -------------------------------------------------------------
def test_l2p_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        N, T, J = rng.integers(1, 4, size=3)
        p, t = rng.normal(size=(2, N, T, J, 3))
        mean, std = rng.normal(size=J * 3), rng.uniform(0.5, 2, size=J * 3)
        want = frame_l2_oracle(((p.reshape(N, T, -1) - mean) / std), ((t.reshape(N, T, -1) - mean) / std))
        assert abs(l2p(p, t, mean, std) - want) < 1e-9


def test_l2p_example_and_statistics():
    t = np.zeros((1, 2, 1, 3))
    p = t.copy()
    p[0, 0, 0] = [3.0, 4.0, 0.0]
    assert l2p(p, t) == 2.5
    assert l2p(p, t, std=np.array([1.0, 2.0, 1.0])) == (math.sqrt(9 + 4) + 0) / 2
    mean, std = position_statistics(np.stack([np.zeros((2, 3)), np.full((2, 3), 2.0)]))
    assert mean.tolist() == [1.0] * 6 and std.tolist() == [1.0] * 6
    _, std = position_statistics(np.zeros((4, 2, 3)))
    assert std.tolist() == [1.0] * 6


def test_l2q_matches_oracle_and_is_sign_invariant():
    rng = np.random.default_rng(3)
    for _ in range(100):
        N, T, J = rng.integers(1, 4, size=3)
        p, t = random_unit_quats(rng, (N, T, J)), random_unit_quats(rng, (N, T, J))
        aligned = np.where((np.sum(p * t, -1) < 0)[..., None], -p, p)
        assert abs(l2q(p, t) - frame_l2_oracle(aligned, t)) < 1e-9
    q = random_unit_quats(rng, (2, 3, 4))
    assert l2q(-q, q) == 0.0
    with pytest.raises(MetricInputError):
        l2q(2 * q, q)


# -- NPSS ------------------------------------------------------------------
def test_npss_neighbouring_bins():
    s = np.arange(32)
    truth = np.cos(2 * np.pi * 2 * s / 32)[None, :, None]
    pred = np.cos(2 * np.pi * 1 * s / 32)[None, :, None]
    assert abs(npss(pred, truth) - 1.0) < 1e-12
    assert npss(truth, truth) == 0.0


def test_npss_matches_brute_force_dft():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p, t = rng.normal(size=(2, 2, 12, 3))
        assert abs(npss(p, t) - npss_oracle(p, t)) < 1e-9


def test_npss_amplitude_invariance():
    rng = np.random.default_rng(5)
    p, t = rng.normal(size=(2, 3, 16, 4))
    assert abs(npss(7.5 * p, t) - npss(p, t)) < 1e-12


def test_npss_zero_power_feature_warns():
    rng = np.random.default_rng(6)
    p, t = rng.normal(size=(2, 1, 8, 2))
    t[..., 1] = 0.0
    with pytest.warns(UserWarning, match="zero ground-truth power"):
        got = npss(p, t)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert got == npss(p[..., :1], t[..., :1])


# -- baselines -------------------------------------------------------------
def test_interpolation_is_exact_on_affine_motion():
    rng = np.random.default_rng(7)
    t = np.arange(26.0)[:, None, None]
    x = rng.normal(size=(1, 22, 3)) + t * rng.normal(size=(1, 22, 3))
    vis = gen_inbetween_mask(26, 10, 15, 1)
    np.testing.assert_allclose(baseline_interpolation(x, vis), x, atol=1e-12)


def test_zero_velocity_holds_last_observed_pose():
    x = np.random.default_rng(8).normal(size=(35, 22, 3))
    out = baseline_zero_velocity(x, gen_forecast_mask(35, 10))
    assert (out[10:] == x[9]).all()


def test_rotation_interpolation_baseline():
    angles = np.linspace(0, 1.2, 5)
    r6 = quaternion_to_rot6d(quat_from_axis_angle(np.array([0.0, 0, 1]), angles))[:, None, :]
    vis = np.array([True, False, False, False, True])[:, None]
    got = rot6d_to_quaternion(baseline_interpolation(r6, vis, ORTHO6D)[:, 0])
    want = quat_from_axis_angle(np.array([0.0, 0, 1]), angles)
    np.testing.assert_allclose(np.abs(np.sum(got * want, -1)), 1.0, atol=1e-12)


# -- reports ---------------------------------------------------------------
def test_report_csv_round_trip(tmp_path):
    rep = EvalReport(sample_count=12, fingerprint="abc")
    rep.add("zero_velocity", "MPJPE@25", 101.25)
    rep.add("unimask", "MPJPE@25", 1 / 3)
    rep.add("unimask", "NPSS@25", 0.125)
    back = EvalReport.from_csv(rep.to_csv(tmp_path / "r.csv"))
    assert back == rep
    assert EvalReport.from_csv(str(tmp_path / "r.csv")) == rep
    with pytest.raises(ValueError):
        rep.add("x", "y", float("nan"))
    with pytest.raises(ValueError):
        rep.add("x", "y", -1.0)


def test_report_merge_and_table():
    a = EvalReport(sample_count=2, fingerprint="f1")
    a.add("m", "A", 1.0)
    b = EvalReport(sample_count=3, fingerprint="f2")
    b.add("m", "B", 2.0)
    b.add("n", "A", 3.5)
    merged = a.merge(b)
    assert merged.rows == {"m": {"A": 1.0, "B": 2.0}, "n": {"A": 3.5}}
    assert merged.sample_count == 5 and merged.fingerprint == "f1+f2"
    lines = merged.to_table(2).splitlines()
    assert lines[0].split() == ["method", "A", "B"]
    assert lines[3].split() == ["n", "3.50", "-"]
