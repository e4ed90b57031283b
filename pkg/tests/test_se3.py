import math

import numpy as np
import pytest
import scipy.linalg

from otv.errors import AngleNearPi
from otv.se3 import (
    Pose,
    Twist,
    quat_from_axis_angle,
    quat_normalize,
    quat_to_zyx,
    rpy_to_quat,
    se3_compose,
    se3_distance,
    se3_exp,
    se3_interpolate,
    se3_inverse,
    se3_log,
)

from _util import hat6, random_pose

Z = np.array([0.0, 0.0, 1.0])


def mat_log(pose: Pose) -> np.ndarray:
    """Independent oracle: dense matrix log of the 4x4 transform (Pade, scipy)."""
    m = scipy.linalg.logm(pose.matrix())
    m = np.real(m)
    w = np.array([m[2, 1], m[0, 2], m[1, 0]])
    return np.concatenate([w, m[:3, 3]])


def mat_exp(v: np.ndarray) -> np.ndarray:
    """Independent oracle: dense matrix exp of a 6-vector twist."""
    return scipy.linalg.expm(hat6(v))


def test_compose_identity():
    rng = np.random.default_rng(0)
    t = random_pose(rng)
    assert se3_compose(Pose.identity(), t).approx_equal(t)
    assert se3_compose(t, Pose.identity()).approx_equal(t)


def test_compose_inverse_is_identity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        t = random_pose(rng)
        assert se3_compose(t, se3_inverse(t)).approx_equal(Pose.identity(), tol=1e-9)


def test_two_quarter_turns_make_half_turn():
    quarter = Pose(quat_from_axis_angle(Z, math.pi / 2), np.zeros(3))
    half = Pose(quat_from_axis_angle(Z, math.pi), np.zeros(3))
    assert se3_compose(quarter, quarter).approx_equal(half, tol=1e-12)


def test_quaternion_stays_normalized():
    rng = np.random.default_rng(2)
    t = random_pose(rng)
    for _ in range(200):
        t = se3_compose(t, random_pose(rng, max_angle=0.5))
        assert abs(np.linalg.norm(t.q) - 1.0) < 1e-9
        assert t.q[0] >= 0.0


def test_pose_equality_under_double_cover():
    rng = np.random.default_rng(3)
    t = random_pose(rng)
    assert t.approx_equal(Pose(-t.q, t.t.copy()))


def test_log_of_identity_is_zero():
    tw = se3_log(Pose.identity())
    np.testing.assert_allclose(tw.as_vector(), np.zeros(6), atol=1e-15)


def test_exp_of_pure_yaw():
    p = se3_exp(Twist(np.array([0.0, 0.0, math.pi / 2]), np.zeros(3)))
    expected = Pose(quat_from_axis_angle(Z, math.pi / 2), np.zeros(3))
    assert p.approx_equal(expected, tol=1e-12)


def test_exp_log_round_trip_1000():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        t = random_pose(rng, max_angle=math.pi - 1e-3)
        back = se3_exp(se3_log(t))
        assert back.approx_equal(t, tol=1e-9)


def test_log_matches_matrix_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        t = random_pose(rng, max_angle=3.0)
        np.testing.assert_allclose(se3_log(t).as_vector(), mat_log(t), atol=1e-8)


def test_exp_matches_matrix_oracle():
    rng = np.random.default_rng(6)
    for _ in range(100):
        v = rng.uniform(-1.5, 1.5, size=6)
        np.testing.assert_allclose(se3_exp(Twist.from_vector(v)).matrix(), mat_exp(v), atol=1e-9)


def test_log_near_pi_raises():
    t = Pose(quat_from_axis_angle(Z, math.pi - 1e-9), np.zeros(3))
    with pytest.raises(AngleNearPi):
        se3_log(t)


def test_interpolate_endpoints():
    rng = np.random.default_rng(7)
    a, b = random_pose(rng), random_pose(rng)
    assert se3_interpolate(a, b, 0.0).approx_equal(a, tol=1e-12)
    assert se3_interpolate(a, b, 1.0).approx_equal(b, tol=1e-9)


def test_interpolate_rotation_midpoint():
    a = Pose.identity()
    b = Pose(quat_from_axis_angle(Z, math.pi / 2), np.zeros(3))
    mid = se3_interpolate(a, b, 0.5)
    expected = Pose(quat_from_axis_angle(Z, math.pi / 4), np.zeros(3))
    assert mid.approx_equal(expected, tol=1e-12)


def test_interpolate_translations_match_matrix_oracle():
    # pure translations move along the SE(3) geodesic; check against expm/logm
    rng = np.random.default_rng(8)
    for _ in range(20):
        a = Pose(np.array([1.0, 0, 0, 0]), rng.uniform(-1, 1, 3))
        b = Pose(np.array([1.0, 0, 0, 0]), rng.uniform(-1, 1, 3))
        frac = rng.uniform(0, 1)
        got = se3_interpolate(a, b, frac)
        rel = np.real(scipy.linalg.logm(np.linalg.inv(a.matrix()) @ b.matrix()))
        expected = a.matrix() @ scipy.linalg.expm(frac * rel)
        np.testing.assert_allclose(got.matrix(), expected, atol=1e-9)


def test_interpolate_distance_proportionality():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a, b = random_pose(rng, max_angle=2.5), random_pose(rng, max_angle=2.5)
        try:
            full = se3_distance(a, b)
        except AngleNearPi:
            continue
        frac = rng.uniform(0, 1)
        part = se3_distance(a, se3_interpolate(a, b, frac))
        assert abs(part - frac * full) < 1e-9


def test_interpolate_rejects_out_of_range_fraction():
    with pytest.raises(ValueError):
        se3_interpolate(Pose.identity(), Pose.identity(), 1.5)


def test_round_trip_10k_under_angle_3():
    rng = np.random.default_rng(10)
    for _ in range(10_000):
        t = random_pose(rng, max_angle=3.0)
        assert se3_exp(se3_log(t)).approx_equal(t, tol=1e-9)


def test_zyx_euler_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(200):
        yaw, pitch, roll = rng.uniform(-1.4, 1.4, size=3)
        q = quat_normalize(rpy_to_quat(roll, pitch, yaw))
        got = quat_to_zyx(q)
        np.testing.assert_allclose(got, (yaw, pitch, roll), atol=1e-12)
