import math

import numpy as np
import pytest

from otv.arm import (
    EndEffectorTarget,
    FilterState,
    IkConfig,
    MappingConfig,
    arm_chain,
    calibrate,
    clik_step,
    filter_pose,
    home_posture,
    map_head,
    map_operator_to_targets,
    neck_joints,
    nullspace_correction,
    solve_arm,
)
from otv.errors import MissingComponent
from otv.kinematics import forward_kinematics, jacobian, manipulability
from otv.model import load_robot_model
from otv.opframe import HandKeypoints, OperatorFrame
from otv.paths import model_path
from otv.se3 import Pose, quat_from_axis_angle, se3_distance

from _util import random_pose, reachable_target, run_ik_harness

Z = np.array([0.0, 0.0, 1.0])


def h1():
    return load_robot_model(model_path("h1"))


def gr1():
    return load_robot_model(model_path("gr1"))


def flat_hand(center) -> HandKeypoints:
    base = np.asarray(center, dtype=float)
    pts = base + np.array([
        [0, 0, 0], [0.05, 0.04, 0], [0.09, 0.02, 0],
        [0.095, 0, 0], [0.09, -0.02, 0], [0.08, -0.04, 0],
    ])
    return HandKeypoints.from_array(pts)


def full_frame(t=0.0, head=None, wl=None, wr=None) -> OperatorFrame:
    head = head or Pose.identity()
    wl = wl or Pose(np.array([1.0, 0, 0, 0]), np.array([0.3, 0.25, -0.2]))
    wr = wr or Pose(np.array([1.0, 0, 0, 0]), np.array([0.3, -0.25, -0.2]))
    return OperatorFrame(t, head, wl, wr, flat_hand(wl.t), flat_hand(wr.t))


# -- calibration ---------------------------------------------------------------


def test_calibrate_identity_when_facing_forward():
    cal = calibrate(full_frame())
    np.testing.assert_allclose(cal.align_r, np.eye(3), atol=1e-12)


def test_calibrate_rotated_world_yields_minus_yaw():
    q = quat_from_axis_angle(Z, math.pi / 2)
    frame = full_frame(head=Pose(q, np.zeros(3)))
    cal = calibrate(frame)
    expected = quat_from_axis_angle(Z, -math.pi / 2)
    np.testing.assert_allclose(
        np.minimum(np.abs(cal.align_q - expected), np.abs(cal.align_q + expected)),
        0.0, atol=1e-12)


def test_calibrate_requires_all_components():
    with pytest.raises(MissingComponent):
        calibrate(OperatorFrame(0.0, head=Pose.identity()))


# -- mapping -------------------------------------------------------------------


def test_wrist_at_head_maps_to_robot_head():
    cal = calibrate(full_frame())
    head_robot = Pose(np.array([1.0, 0, 0, 0]), np.array([0.06, 0.0, 0.49]))
    frame = full_frame(wl=Pose.identity(), wr=Pose.identity())
    left, right = map_operator_to_targets(frame, cal, head_robot)
    np.testing.assert_allclose(left.position, head_robot.t, atol=1e-12)
    np.testing.assert_allclose(right.position, head_robot.t, atol=1e-12)


def test_offset_maps_by_vector_arithmetic():
    cal = calibrate(full_frame())
    head_robot = Pose(np.array([1.0, 0, 0, 0]), np.array([0.0, 0.0, 0.4]))
    wl = Pose(np.array([1.0, 0, 0, 0]), np.array([0.3, 0.0, -0.2]))
    frame = full_frame(wl=wl)
    left, _ = map_operator_to_targets(frame, cal, head_robot)
    np.testing.assert_allclose(left.position, [0.3, 0.0, 0.2], atol=1e-12)


def test_head_motion_invariance():
    # with wrists fixed in the world, only the head terms move the targets and
    # orientations never change
    rng = np.random.default_rng(0)
    cal = calibrate(full_frame())
    big_box = MappingConfig(reach_lo=np.full(3, -100.0), reach_hi=np.full(3, 100.0))
    wl = random_pose(rng, max_angle=1.0)
    frame1 = full_frame(head=Pose.identity(), wl=wl)
    frame2 = full_frame(head=random_pose(rng, max_angle=0.5), wl=wl)
    hr1 = random_pose(rng, max_angle=0.3)
    hr2 = random_pose(rng, max_angle=0.3)
    l1, _ = map_operator_to_targets(frame1, cal, hr1, big_box)
    l2, _ = map_operator_to_targets(frame2, cal, hr2, big_box)
    head_term = (hr1.t - hr2.t) - cal.align_r @ (frame1.head.t - frame2.head.t)
    np.testing.assert_allclose(l1.position - l2.position, head_term, atol=1e-12)
    np.testing.assert_allclose(l1.orientation, l2.orientation, atol=1e-12)


def test_out_of_reach_target_is_clamped_and_flagged():
    cal = calibrate(full_frame())
    head_robot = Pose.identity()
    wl = Pose(np.array([1.0, 0, 0, 0]), np.array([5.0, 0.0, 0.0]))
    frame = full_frame(wl=wl)
    left, _ = map_operator_to_targets(frame, cal, head_robot, MappingConfig())
    assert left.clamped
    assert left.position[0] == MappingConfig().reach_hi[0]


def test_missing_wrist_omits_that_side():
    cal = calibrate(full_frame())
    frame = OperatorFrame(1.0, head=Pose.identity(),
                          wrist_right=Pose.identity())
    left, right = map_operator_to_targets(frame, cal, Pose.identity())
    assert left is None and right is not None


# -- head mapping ----------------------------------------------------------------


def test_map_head_zero_at_calibration():
    cal = calibrate(full_frame())
    q = map_head(cal.head0, cal, h1())
    np.testing.assert_allclose(q, 0.0, atol=1e-12)


def test_map_head_pure_yaw():
    model = h1()
    cal = calibrate(full_frame())
    head = Pose(quat_from_axis_angle(Z, 0.3), np.zeros(3))
    q = map_head(head, cal, model)
    np.testing.assert_allclose(q, [0.3, 0.0], atol=1e-12)


def test_map_head_clamps_to_limits():
    model = h1()
    cal = calibrate(full_frame())
    head = Pose(quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), 1.5), np.zeros(3))
    q = map_head(head, cal, model)
    limit = model.upper[model.joint_index["neck_pitch"]]
    assert q[1] == limit


def test_map_head_gr1_roll_axis():
    model = gr1()
    assert [k for _, k in neck_joints(model)] == ["yaw", "roll", "pitch"]
    cal = calibrate(full_frame())
    head = Pose(quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), 0.2), np.zeros(3))
    q = map_head(head, cal, model)
    np.testing.assert_allclose(q, [0.0, 0.2, 0.0], atol=1e-12)


# -- filtering -------------------------------------------------------------------


def test_filter_lambda_one_passes_through():
    rng = np.random.default_rng(1)
    st = FilterState(lam=1.0)
    filter_pose(st, Pose.identity())
    t = random_pose(rng)
    assert filter_pose(st, t).approx_equal(t, tol=1e-12)


def test_filter_first_call_passes_target():
    rng = np.random.default_rng(2)
    st = FilterState(lam=0.3)
    t = random_pose(rng)
    assert filter_pose(st, t) is t


def test_filter_geometric_decay():
    rng = np.random.default_rng(3)
    st = FilterState(lam=0.6)
    start, target = random_pose(rng, 1.0), random_pose(rng, 1.0)
    filter_pose(st, start)
    d = se3_distance(start, target)
    for k in range(1, 6):
        out = filter_pose(st, target)
        expected = d * (1 - st.lam) ** k
        assert abs(se3_distance(out, target) - expected) < 1e-9


def test_filter_step_bound_property():
    rng = np.random.default_rng(4)
    st = FilterState(lam=0.45)
    prev = random_pose(rng, 1.0)
    filter_pose(st, prev)
    for _ in range(50):
        target = random_pose(rng, 1.5)
        before = st.last
        out = filter_pose(st, target)
        lhs = se3_distance(before, out)
        rhs = st.lam * se3_distance(before, target)
        assert lhs <= rhs + 1e-12


# -- IK ----------------------------------------------------------------------------


def test_clik_zero_delta_at_target():
    model = h1()
    q = home_posture(model)
    chain = arm_chain(model, "left")
    pose = forward_kinematics(model, q, chain.ee_frame)
    dq = clik_step(model, q, EndEffectorTarget(pose.t, pose.q, "left"), IkConfig())
    assert float(np.abs(dq).max()) < 1e-12


def test_clik_delta_shrinks_with_damping():
    # step clamp disabled so the raw DLS monotonicity in mu is visible
    model = h1()
    q = home_posture(model)
    target = reachable_target(model, "left", seed=5)
    norms = []
    for mu in (1e-2, 1e-1, 1.0, 10.0, 100.0):
        dq = clik_step(model, q, target, IkConfig(damping=mu, step_clamp=1e9))
        norms.append(float(np.linalg.norm(dq)))
    assert all(a >= b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-3


def test_ik_harness_converges():
    model = h1()
    results = run_ik_harness(model, "left", seeds=range(100))
    ok = sum(r.converged for r in results)
    assert ok >= 99


def test_solve_arm_zero_iterations_when_converged():
    model = h1()
    q = home_posture(model)
    chain = arm_chain(model, "left")
    pose = forward_kinematics(model, q, chain.ee_frame)
    res = solve_arm(model, q, EndEffectorTarget(pose.t, pose.q, "left"), IkConfig())
    assert res.converged and res.iterations == 0
    np.testing.assert_array_equal(res.q, q)


def test_solve_arm_stays_in_limits():
    model = h1()
    for seed in range(20):
        res = solve_arm(model, home_posture(model), reachable_target(model, "left", seed),
                        IkConfig(max_iters=50))
        assert model.in_limits(res.q)


def test_solve_arm_deterministic():
    model = h1()
    target = reachable_target(model, "right", seed=11)
    a = solve_arm(model, home_posture(model), target, IkConfig(max_iters=40))
    b = solve_arm(model, home_posture(model), target, IkConfig(max_iters=40))
    np.testing.assert_array_equal(a.q, b.q)
    assert a.iterations == b.iterations


# -- nullspace ----------------------------------------------------------------------


def test_nullspace_zero_above_threshold():
    model = h1()
    q = home_posture(model)
    chain = arm_chain(model, "left")
    j = jacobian(model, q, chain.ee_frame, chain.joints)
    assert manipulability(j) >= 1e-3
    v = nullspace_correction(model, q, model.mid_q(), j, IkConfig(), chain.joints)
    np.testing.assert_array_equal(v, 0.0)


def test_nullspace_zero_when_at_reference():
    model = h1()
    chain = arm_chain(model, "left")
    q = model.zero_q()  # straight arm: singular
    j = jacobian(model, q, chain.ee_frame, chain.joints)
    assert manipulability(j) < 1e-3
    v = nullspace_correction(model, q, q, j, IkConfig(), chain.joints)
    np.testing.assert_array_equal(v, 0.0)


def test_nullspace_projection_property():
    # any emitted delta moves the end-effector at most 1e-6 * |delta|
    model = h1()
    chain = arm_chain(model, "left")
    idx = list(chain.q_indices)
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 100:
        q = home_posture(model).copy()
        # near-singular: almost straight arm with small random perturbations
        q[idx] = rng.normal(scale=0.02, size=7)
        j = jacobian(model, q, chain.ee_frame, chain.joints)
        if manipulability(j) >= 1e-3:
            continue
        q_ref = model.mid_q()
        v = nullspace_correction(model, q, q_ref, j, IkConfig(), chain.joints)[idx]
        jv = float(np.linalg.norm(j @ v))
        assert jv <= 1e-6 * max(float(np.linalg.norm(v)), 1e-9)
        checked += 1
