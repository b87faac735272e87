import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from unimask.kinematics import (
    ORTHO6D,
    DegenerateRotationError,
    MotionTensor,
    SkeletonTopology,
    default_topology,
    euler_to_quaternion,
    forward_kinematics,
    hemisphere_align,
    matrix_to_quaternion,
    matrix_to_rot6d,
    quat_angle,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
    quaternion_to_rot6d,
    rot6d_to_matrix,
    rot6d_to_quaternion,
    slerp,
)


def random_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def assert_rotation(R, tol=1e-9):
    eye = np.broadcast_to(np.eye(3), R.shape)
    np.testing.assert_allclose(np.swapaxes(R, -1, -2) @ R, eye, atol=tol)
    np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=tol)


# -- ortho-6D --------------------------------------------------------------
def test_rot6d_examples():
    np.testing.assert_array_equal(rot6d_to_matrix([1, 0, 0, 0, 1, 0]), np.eye(3))
    np.testing.assert_array_equal(rot6d_to_matrix([2, 0, 0, 0, 3, 0]), np.eye(3))
    R = rot6d_to_matrix([1, 0, 0, 1, 1, 0])
    assert_rotation(R, 1e-12)
    np.testing.assert_allclose(R, np.eye(3), atol=1e-15)   # residual of (1,1,0) is (0,1,0)


def test_rot6d_degenerate():
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix([0, 0, 0, 0, 1, 0])
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix([1, 0, 0, 2, 0, 0])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-3, 3)), st.floats(0.1, 10), st.floats(0.1, 10))
def test_rot6d_is_a_scale_invariant_rotation(r6, s1, s2):
    a1, a2 = r6[:3], r6[3:]
    if np.linalg.norm(a1) < 1e-2 or np.linalg.norm(np.cross(a1, a2)) < 1e-2 * np.linalg.norm(a2) + 1e-3:
        return
    R = rot6d_to_matrix(r6)
    assert_rotation(R)
    scaled = np.concatenate([s1 * a1, s2 * a2])
    np.testing.assert_allclose(rot6d_to_matrix(scaled), R, atol=1e-12)


def test_rot6d_matrix_round_trip():
    R = quat_to_matrix(random_quats(np.random.default_rng(0), 50))
    np.testing.assert_allclose(rot6d_to_matrix(matrix_to_rot6d(R)), R, atol=1e-14)


# -- quaternions -----------------------------------------------------------
def test_matrix_to_quaternion_examples():
    np.testing.assert_array_equal(matrix_to_quaternion(np.eye(3)), [1, 0, 0, 0])
    Rz = np.array([[-1.0, 0, 0], [0, -1.0, 0], [0, 0, 1.0]])
    q = matrix_to_quaternion(Rz)
    np.testing.assert_allclose(np.abs(q), [0, 0, 0, 1], atol=1e-15)


def test_matrix_to_quaternion_rejects_non_rotations():
    with pytest.raises(ValueError):
        matrix_to_quaternion(np.diag([1.0, 1.0, 1.1]))
    with pytest.raises(ValueError):
        matrix_to_quaternion(np.diag([1.0, 1.0, -1.0]))


def test_quaternion_round_trip():
    q = random_quats(np.random.default_rng(1), 1000)
    back = matrix_to_quaternion(quat_to_matrix(q))
    assert np.abs(np.linalg.norm(hemisphere_align(back, q) - q, axis=-1)).max() < 1e-9
    assert np.all(back[:, 0] >= 0)
    np.testing.assert_allclose(np.abs(np.sum(rot6d_to_quaternion(quaternion_to_rot6d(q)) * q, -1)), 1.0,
                               atol=1e-12)


def test_quat_mul_matches_matrix_product():
    rng = np.random.default_rng(2)
    a, b = random_quats(rng, 20), random_quats(rng, 20)
    np.testing.assert_allclose(quat_to_matrix(quat_mul(a, b)), quat_to_matrix(a) @ quat_to_matrix(b),
                               atol=1e-12)
    v = rng.normal(size=(20, 3))
    np.testing.assert_allclose(quat_rotate(a, v), np.einsum("nij,nj->ni", quat_to_matrix(a), v), atol=1e-12)


# -- slerp -----------------------------------------------------------------
def test_slerp_examples():
    q = random_quats(np.random.default_rng(3), 1)[0]
    for t in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(slerp(q, q, t), q, atol=1e-15)
    ident = np.array([1.0, 0, 0, 0])
    half_turn = quat_from_axis_angle([0, 0, 1], np.pi)
    np.testing.assert_allclose(slerp(ident, half_turn, 0.5), quat_from_axis_angle([0, 0, 1], np.pi / 2),
                               atol=1e-15)


def test_slerp_endpoints_and_hemisphere():
    rng = np.random.default_rng(4)
    q0, q1 = random_quats(rng, 100), random_quats(rng, 100)
    np.testing.assert_allclose(slerp(q0, q1, 0.0), q0, atol=1e-15)
    np.testing.assert_allclose(slerp(q0, q1, 1.0), hemisphere_align(q1, q0), atol=1e-15)


def test_slerp_angle_oracle():
    rng = np.random.default_rng(5)
    q0, q1 = random_quats(rng, 1000), random_quats(rng, 1000)
    t = rng.random(1000)
    err = np.abs(quat_angle(slerp(q0, q1, t), q0) - t * quat_angle(q0, q1))
    assert err.max() < 1e-9


def test_slerp_tiny_angle_falls_back_to_lerp():
    q0 = np.array([1.0, 0, 0, 0])
    q1 = quat_from_axis_angle([1, 0, 0], 1e-9)
    mid = slerp(q0, q1, 0.5)
    assert np.all(np.isfinite(mid))
    np.testing.assert_allclose(quat_angle(mid, q0), 0.5e-9, rtol=1e-6)


# -- Euler -----------------------------------------------------------------
def test_euler_composes_in_channel_order():
    a = np.array([30.0, -45.0, 60.0])
    q = euler_to_quaternion(a, "ZXY")
    Rz = quat_to_matrix(quat_from_axis_angle([0, 0, 1], np.radians(30)))
    Rx = quat_to_matrix(quat_from_axis_angle([1, 0, 0], np.radians(-45)))
    Ry = quat_to_matrix(quat_from_axis_angle([0, 1, 0], np.radians(60)))
    np.testing.assert_allclose(quat_to_matrix(q), Rz @ Rx @ Ry, atol=1e-12)
    assert not np.allclose(quat_to_matrix(euler_to_quaternion(a, "XYZ")), Rz @ Rx @ Ry)


# -- topology and FK -------------------------------------------------------
def test_default_topology_shape():
    topo = default_topology()
    assert topo.num_joints == 22
    assert topo.parents[0] == -1
    assert all(0 <= p < j for j, p in enumerate(topo.parents) if j)


def test_topology_validation():
    with pytest.raises(ValueError):
        SkeletonTopology(["a", "b"], [-1, -1], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        SkeletonTopology(["a", "b", "c"], [-1, 2, 0], np.zeros((3, 3)))
    topo = default_topology()
    assert SkeletonTopology.from_dict(topo.to_dict()) == topo


def test_fk_identity_is_cumulative_offsets():
    topo = default_topology()
    quats = np.tile([1.0, 0, 0, 0], (topo.num_joints, 1))
    pos = forward_kinematics(topo, quats, np.zeros(3))
    for j in range(topo.num_joints):
        expect = np.zeros(3)
        k = j
        while k > 0:
            expect += topo.offsets[k]
            k = topo.parents[k]
        np.testing.assert_allclose(pos[j], expect, atol=1e-15)


def test_fk_two_joint_chain():
    topo = SkeletonTopology(["root", "tip"], [-1, 0], [[0, 0, 0], [1, 0, 0]])
    rot = np.stack([quat_from_axis_angle([0, 0, 1], np.pi / 2), np.array([1.0, 0, 0, 0])])
    np.testing.assert_allclose(forward_kinematics(topo, rot, np.zeros(3))[1], [0, 1, 0], atol=1e-15)


def fk_recursive(topo, R, root, j):
    """Global rotation and position of joint j by recursion up the chain."""
    if j == 0:
        return R[0], root
    pR, pp = fk_recursive(topo, R, root, topo.parents[j])
    return pR @ R[j], pp + pR @ topo.offsets[j]


def test_fk_matches_recursive_oracle():
    rng = np.random.default_rng(6)
    topo = SkeletonTopology([f"j{i}" for i in range(5)], [-1, 0, 1, 1, 3], rng.normal(size=(5, 3)))
    q = random_quats(rng, 5)
    root = rng.normal(size=3)
    R = quat_to_matrix(q)
    pos, glob = forward_kinematics(topo, q, root, return_rotations=True)
    for j in range(5):
        gR, gp = fk_recursive(topo, R, root, j)
        np.testing.assert_allclose(pos[j], gp, atol=1e-9)
        np.testing.assert_allclose(quat_to_matrix(glob[j]), gR, atol=1e-9)
    np.testing.assert_allclose(forward_kinematics(topo, quaternion_to_rot6d(q), root), pos, atol=1e-12)


def test_fk_root_rotation_equivariance():
    rng = np.random.default_rng(7)
    topo = default_topology()
    q = random_quats(rng, 22)
    pos = forward_kinematics(topo, q, np.zeros(3))
    spin = quat_from_axis_angle([0.3, 1, 0.2], 0.8)
    q2 = q.copy()
    q2[0] = quat_mul(spin, q[0])
    np.testing.assert_allclose(forward_kinematics(topo, q2, np.zeros(3)), quat_rotate(spin, pos), atol=1e-12)


def test_motion_tensor_validation():
    m = MotionTensor(np.zeros((4, 22, 6)), repr=ORTHO6D)
    assert m.visibility.shape == (4, 22) and m.visibility.all()
    assert m.pose_dim == 132
    with pytest.raises(ValueError):
        MotionTensor(np.zeros((4, 22, 3)), repr=ORTHO6D)
    with pytest.raises(ValueError):
        MotionTensor(np.zeros((4, 22, 3)), visibility=np.ones((4, 21), bool))
