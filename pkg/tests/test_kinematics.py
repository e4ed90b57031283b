import math

import numpy as np
import pytest

from otv.errors import UnknownFrame
from otv.kinematics import forward_kinematics, frames_fk, jacobian, manipulability
from otv.model import load_robot_model, parse_robot_model
from otv.paths import model_path
from otv.se3 import se3_compose, se3_inverse, se3_log

PLANAR = """
robot planar
joint j1 revolute parent=base child=a axis=0,0,1 limits=-3.15,3.15 actuated
joint j2 revolute parent=a child=b xyz=0.3,0,0 axis=0,0,1 limits=-3.15,3.15 actuated
frame tip link=b xyz=0.2,0,0
"""


def h1():
    return load_robot_model(model_path("h1"))


def gr1():
    return load_robot_model(model_path("gr1"))


def test_planar_two_link_hand_computed():
    model = parse_robot_model(PLANAR)
    pose = forward_kinematics(model, np.array([math.pi / 2, math.pi / 2]), "tip")
    np.testing.assert_allclose(pose.t, [-0.2, 0.3, 0.0], atol=1e-12)


def test_zero_pose_documented_frames():
    fr = frames_fk(h1(), np.zeros(40), ["head", "l_ee", "r_ee"])
    np.testing.assert_allclose(fr["head"].t, [0.06, 0.0, 0.49], atol=1e-12)
    np.testing.assert_allclose(fr["l_ee"].t, [0.0, 0.22, -0.28], atol=1e-12)
    np.testing.assert_allclose(fr["r_ee"].t, [0.0, -0.22, -0.28], atol=1e-12)


def test_unknown_frame_raises():
    with pytest.raises(UnknownFrame):
        forward_kinematics(h1(), np.zeros(40), "nope")


def test_driven_joint_entry_ignored():
    model = h1()
    q = model.zero_q()
    q[model.joint_index["l_index_mcp"]] = 0.5
    base = forward_kinematics(model, q, "l_index_tip")
    q2 = q.copy()
    q2[model.joint_index["l_index_pip"]] = 1.2  # overridden by the coupling
    perturbed = forward_kinematics(model, q2, "l_index_tip")
    assert base.approx_equal(perturbed, tol=0.0)


def test_fk_bitwise_reproducible():
    model = h1()
    rng = np.random.default_rng(2)
    q = rng.uniform(model.lower, model.upper)
    a = forward_kinematics(model, q, "l_ee")
    b = forward_kinematics(model, q, "l_ee")
    assert np.array_equal(a.q, b.q) and np.array_equal(a.t, b.t)


def _fd_check(model, frame, joints, q, h=1e-6):
    """Central-difference directional derivative vs J @ delta."""
    j = jacobian(model, q, frame, joints)
    rng = np.random.default_rng(int(abs(q).sum() * 1e6) % 2**31)
    delta = rng.normal(size=len(joints))
    delta /= np.linalg.norm(delta)
    qp, qm = q.copy(), q.copy()
    for name, d in zip(joints, delta):
        qp[model.joint_index[name]] += h * d
        qm[model.joint_index[name]] -= h * d
    tp = forward_kinematics(model, qp, frame)
    tm = forward_kinematics(model, qm, frame)
    tw = se3_log(se3_compose(se3_inverse(tm), tp)).as_vector() / (2 * h)
    return float(np.abs(j @ delta - tw).max())


ARM_JOINTS = tuple(f"l_{j}" for j in ("shoulder_pitch", "shoulder_roll", "shoulder_yaw",
                                      "elbow", "wrist_roll", "wrist_pitch", "wrist_yaw"))


def test_jacobian_matches_finite_differences():
    for model, frame in ((h1(), "l_ee"), (gr1(), "r_ee"), (h1(), "l_index_tip"), (h1(), "head")):
        rng = np.random.default_rng(3)
        margin = 0.05 * (model.upper - model.lower)
        for _ in range(25):
            q = rng.uniform(model.lower + margin, model.upper - margin)
            joints = tuple(
                n for n in model.movable_names
                if model.joint_index[n] not in model.driven_index
            )
            assert _fd_check(model, frame, joints, q) < 1e-5


def test_jacobian_includes_coupling_chain_rule():
    # l_index_pip is driven 1:1 by l_index_mcp, so the mcp column must move the tip
    # twice as much as a free pip would; verify against finite differences of FK
    model = h1()
    q = model.zero_q()
    q[model.joint_index["l_index_mcp"]] = 0.4
    j = jacobian(model, q, "l_index_tip", ("l_index_mcp",))
    h = 1e-6
    qp, qm = q.copy(), q.copy()
    qp[model.joint_index["l_index_mcp"]] += h
    qm[model.joint_index["l_index_mcp"]] -= h
    tp = forward_kinematics(model, qp, "l_index_tip")
    tm = forward_kinematics(model, qm, "l_index_tip")
    tw = se3_log(se3_compose(se3_inverse(tm), tp)).as_vector() / (2 * h)
    np.testing.assert_allclose(j[:, 0], tw, atol=1e-6)


def test_single_revolute_frame_on_axis_has_zero_linear_rows():
    doc = """
robot one
joint j1 revolute parent=base child=a axis=0,0,1 actuated
frame f link=a xyz=0,0,0.5
"""
    model = parse_robot_model(doc)
    j = jacobian(model, np.array([0.7]), "f")
    np.testing.assert_allclose(j[3:, 0], 0.0, atol=1e-15)
    assert abs(np.linalg.norm(j[:3, 0]) - 1.0) < 1e-12


def test_fixed_only_chain_has_empty_jacobian():
    doc = """
robot fixedonly
joint j1 fixed parent=base child=a xyz=0.1,0,0
frame f link=a
"""
    model = parse_robot_model(doc)
    j = jacobian(model, np.zeros(0), "f")
    assert j.shape == (6, 0)


def test_manipulability_extended_planar_is_zero():
    model = parse_robot_model(PLANAR)
    j = jacobian(model, np.zeros(2), "tip")
    # planar positioning sub-problem: rows (vx, vy)
    assert manipulability(j[3:5, :]) < 1e-9


def test_manipulability_identity_is_one():
    assert manipulability(np.eye(6)) == pytest.approx(1.0)


def test_manipulability_matches_eigenvalue_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        j = rng.normal(size=(6, 7))
        eig = np.linalg.eigvalsh(j @ j.T)
        expected = math.sqrt(float(np.prod(np.clip(eig, 0.0, None))))
        assert manipulability(j) == pytest.approx(expected, rel=1e-9)
