import numpy as np
import pytest

from otv.hand import (
    RetargetingConfig,
    RetargetingProblem,
    VectorSpec,
    compute_human_vectors,
    objective,
    retarget_sequence,
    retarget_step,
)
from otv.kinematics import forward_kinematics
from otv.model import load_robot_model
from otv.opframe import HandKeypoints
from otv.paths import model_path
from otv.se3 import Pose, quat_mul

from _util import random_pose


def left_hand_chain():
    return load_robot_model(model_path("h1")).extract_subchain("l_hand")


def left_gripper_chain():
    return load_robot_model(model_path("gr1")).extract_subchain("l_hand")


def sample_keypoints(center=(0.0, 0.0, 0.0)) -> HandKeypoints:
    c = np.asarray(center, dtype=float)
    return HandKeypoints.from_array(c + np.array([
        [0.0, 0.0, 0.0],
        [0.06, 0.05, -0.01],
        [0.10, 0.02, 0.0],
        [0.105, 0.0, 0.0],
        [0.10, -0.02, 0.0],
        [0.085, -0.04, 0.0],
    ]))


def robot_vectors(chain, spec, q_act):
    """Formula re-stated with single-frame FK calls (oracle path)."""
    joints = tuple(j.name for j in chain.joints if j.actuated)
    q = chain.zero_q()
    for v, n in zip(q_act, joints):
        q[chain.joint_index[n]] = v
    out = np.zeros((len(spec), 3))
    for i, pair in enumerate(spec.pairs):
        a = forward_kinematics(chain, q, pair.robot[0]).t
        b = forward_kinematics(chain, q, pair.robot[1]).t
        out[i] = b - a
    return out


def random_q_act(chain, rng, margin=0.1):
    joints = [j for j in chain.joints if j.actuated]
    lo = np.array([j.limits[0] for j in joints])
    hi = np.array([j.limits[1] for j in joints])
    span = hi - lo
    return rng.uniform(lo + margin * span, hi - margin * span)


# -- vector specs ------------------------------------------------------------------


def test_dexterous_spec_is_exactly_seven_vectors():
    spec = VectorSpec.dexterous("l")
    human_pairs = {p.human for p in spec.pairs}
    assert human_pairs == {
        ("wrist", "thumb_tip"), ("wrist", "index_tip"), ("wrist", "middle_tip"),
        ("wrist", "ring_tip"), ("wrist", "pinky_tip"),
        ("thumb_tip", "index_tip"), ("thumb_tip", "middle_tip"),
    }
    assert len(spec) == 7
    spec.validate(left_hand_chain())


def test_gripper_spec_is_the_single_pinch_vector():
    spec = VectorSpec.gripper("l")
    assert len(spec) == 1
    assert spec.pairs[0].human == ("thumb_tip", "index_tip")
    assert spec.pairs[0].robot == ("l_gripper_upper", "l_gripper_lower")
    spec.validate(left_gripper_chain())


# -- human vectors -----------------------------------------------------------------


def test_coincident_keypoints_give_zero_vectors():
    kp = HandKeypoints.from_array(np.zeros((6, 3)))
    spec = VectorSpec.dexterous("l")
    v = compute_human_vectors(kp, Pose.identity(), spec, 1.1)
    np.testing.assert_array_equal(v, 0.0)


def test_alpha_scales_linearly():
    kp = sample_keypoints()
    spec = VectorSpec.dexterous("l")
    v1 = compute_human_vectors(kp, Pose.identity(), spec, 1.0)
    v2 = compute_human_vectors(kp, Pose.identity(), spec, 2.0)
    np.testing.assert_allclose(v2, 2.0 * v1, atol=1e-15)


def test_rigid_motion_invariance():
    rng = np.random.default_rng(0)
    spec = VectorSpec.dexterous("l")
    kp = sample_keypoints()
    wrist = Pose.identity()
    base = compute_human_vectors(kp, wrist, spec, 1.1)
    for _ in range(20):
        motion = random_pose(rng, max_angle=2.5)
        moved = HandKeypoints.from_array(
            np.stack([motion.apply(p) for p in kp.as_array()]))
        wrist_moved = Pose(quat_mul(motion.q, wrist.q), motion.apply(wrist.t))
        got = compute_human_vectors(moved, wrist_moved, spec, 1.1)
        np.testing.assert_allclose(got, base, atol=1e-12)


def test_missing_keypoint_is_structured_error():
    from otv.errors import MissingKeypoint
    from otv.hand import VectorPair

    spec = VectorSpec((VectorPair(("wrist", "nose_tip"), ("l_wrist", "l_thumb_tip")),))
    with pytest.raises(MissingKeypoint):
        compute_human_vectors(sample_keypoints(), Pose.identity(), spec, 1.0)


# -- objective ----------------------------------------------------------------------


def test_objective_zero_on_self_consistent_targets():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(1)
    q = random_q_act(chain, rng)
    prob = RetargetingProblem(chain, spec, robot_vectors(chain, spec, q), q.copy())
    assert objective(q, prob, RetargetingConfig()) < 1e-12


def test_objective_beta_zero_ignores_q_prev():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(2)
    q = random_q_act(chain, rng)
    targets = rng.uniform(-0.1, 0.1, size=(7, 3))
    cfg = RetargetingConfig(beta=0.0)
    a = objective(q, RetargetingProblem(chain, spec, targets, random_q_act(chain, rng)), cfg)
    b = objective(q, RetargetingProblem(chain, spec, targets, random_q_act(chain, rng)), cfg)
    assert a == b


def test_objective_matches_straight_line_oracle():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(3)
    cfg = RetargetingConfig(beta=0.37)
    for _ in range(20):
        q = random_q_act(chain, rng)
        q_prev = random_q_act(chain, rng)
        targets = rng.uniform(-0.15, 0.15, size=(7, 3))
        prob = RetargetingProblem(chain, spec, targets, q_prev)
        diff = targets - robot_vectors(chain, spec, q)
        expected = float(np.sum(diff ** 2) + cfg.beta * np.sum((q - q_prev) ** 2))
        assert objective(q, prob, cfg) == pytest.approx(expected, rel=1e-12)


# -- solver -------------------------------------------------------------------------


def test_round_trip_recovery():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig(alpha=1.1, beta=0.0)
    rng = np.random.default_rng(4)
    lo, hi = None, None
    hits = 0
    for _ in range(50):
        q_star = random_q_act(chain, rng)
        targets = robot_vectors(chain, spec, q_star)
        q_prev = np.clip(q_star + rng.uniform(-0.1, 0.1, size=q_star.size),
                         *RetargetingProblem(chain, spec, targets, q_star).limits())
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
        stacked = np.linalg.norm(targets - robot_vectors(chain, spec, res.q))
        if stacked < 1e-3 and float(np.abs(res.q - q_star).max()) < 1e-2:
            hits += 1
    assert hits >= 48


def test_huge_beta_returns_q_prev():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(5)
    q_prev = random_q_act(chain, rng)
    targets = rng.uniform(-0.1, 0.1, size=(7, 3))
    res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev),
                        RetargetingConfig(beta=1e6))
    assert float(np.abs(res.q - q_prev).max()) < 1e-4


def test_objective_never_increases_vs_q_prev():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(6)
    cfg = RetargetingConfig()
    for _ in range(200):
        q_prev = random_q_act(chain, rng, margin=0.0)
        targets = rng.uniform(-0.2, 0.2, size=(7, 3))
        prob = RetargetingProblem(chain, spec, targets, q_prev)
        res = retarget_step(prob, cfg)
        assert objective(res.q, prob, cfg) <= objective(q_prev, prob, cfg) + 1e-12


def test_limit_safety_fuzz():
    chains = [left_hand_chain(), left_gripper_chain()]
    specs = [VectorSpec.dexterous("l"), VectorSpec.gripper("l")]
    cfg = RetargetingConfig(max_iters=2)
    rng = np.random.default_rng(7)
    for i in range(10_000):
        chain, spec = chains[i % 2], specs[i % 2]
        q_prev = random_q_act(chain, rng, margin=0.0)
        targets = rng.uniform(-0.3, 0.3, size=(len(spec), 3))
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
        lo, hi = RetargetingProblem(chain, spec, targets, q_prev).limits()
        assert np.all(res.q >= lo - 1e-12) and np.all(res.q <= hi + 1e-12)


def test_alpha_consistency():
    # scaling keypoints by s and alpha by 1/s leaves targets and outputs unchanged
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    kp = sample_keypoints()
    rng = np.random.default_rng(8)
    q_prev = random_q_act(chain, rng)
    for s in (0.5, 2.0, 3.7):
        t1 = compute_human_vectors(kp, Pose.identity(), spec, 1.1)
        scaled = HandKeypoints.from_array(kp.as_array() * s)
        t2 = compute_human_vectors(scaled, Pose.identity(), spec, 1.1 / s)
        np.testing.assert_allclose(t2, t1, atol=1e-9)
        r1 = retarget_step(RetargetingProblem(chain, spec, t1, q_prev), RetargetingConfig())
        r2 = retarget_step(RetargetingProblem(chain, spec, t2, q_prev), RetargetingConfig())
        np.testing.assert_allclose(r2.q, r1.q, atol=1e-9)


def test_temporal_continuity_monotone_in_beta():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(9)
    betas = (0.0, 0.1, 1.0, 10.0)
    for _ in range(100):
        q_prev = random_q_act(chain, rng)
        targets = robot_vectors(chain, spec, random_q_act(chain, rng))
        dists = []
        for beta in betas:
            cfg = RetargetingConfig(beta=beta, max_iters=60, step_tol=1e-10)
            res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
            dists.append(float(np.linalg.norm(res.q - q_prev)))
        for a, b in zip(dists, dists[1:]):
            assert b <= a + 1e-9


# -- gripper -----------------------------------------------------------------------


def pinch_keypoints(d: float) -> HandKeypoints:
    pts = np.array([
        [0.0, 0.0, 0.0],
        [0.10, d / 2, 0.0],   # thumb
        [0.10, -d / 2, 0.0],  # index
        [0.11, -0.02, 0.0],
        [0.10, -0.03, 0.0],
        [0.09, -0.04, 0.0],
    ])
    return HandKeypoints.from_array(pts)


def gripper_sweep(betas_cfg: RetargetingConfig, distances):
    chain = left_gripper_chain()
    spec = VectorSpec.gripper("l")
    q_prev = np.zeros(1)
    out = []
    for d in distances:
        targets = compute_human_vectors(pinch_keypoints(d), Pose.identity(), spec,
                                        betas_cfg.alpha)
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), betas_cfg)
        q_prev = res.q
        out.append(float(res.q[0]))
    return out


def test_gripper_limits_hit_with_beta_zero():
    cfg = RetargetingConfig(alpha=1.0, beta=0.0)
    qs = gripper_sweep(cfg, [0.0])
    assert qs[0] == 0.0  # pinch closed -> closed limit
    qs = gripper_sweep(cfg, [0.13])
    assert qs[0] == pytest.approx(0.06, abs=1e-9)  # beyond max opening -> open limit


def test_gripper_strictly_monotone_sweep():
    cfg = RetargetingConfig(alpha=1.0)  # default beta
    distances = np.linspace(0.0, 0.12, 25)
    qs = gripper_sweep(cfg, distances)
    assert qs[0] == 0.0
    for a, b in zip(qs, qs[1:]):
        assert b > a


# -- sequences ----------------------------------------------------------------------


def test_constant_input_is_fixed_point_without_smoothing():
    # beta = 0: each tick re-solves the same problem from its own solution,
    # so the output is bitwise constant after the first frame
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig(beta=0.0)
    hands = [sample_keypoints()] * 10
    wrists = [Pose.identity()] * 10
    qs = retarget_sequence(chain, spec, hands, wrists, cfg, np.zeros(6))
    for q in qs[2:]:
        np.testing.assert_array_equal(q, qs[1])


def test_constant_input_settles_with_smoothing():
    # beta > 0 acts as a joint-space low-pass: per-tick movement decays
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig()
    hands = [sample_keypoints()] * 40
    wrists = [Pose.identity()] * 40
    qs = retarget_sequence(chain, spec, hands, wrists, cfg, np.zeros(6))
    steps = [float(np.linalg.norm(b - a)) for a, b in zip(qs, qs[1:])]
    assert steps[-1] < 0.05 * steps[0]


def test_missing_hand_holds_last_output():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig()
    hands = [sample_keypoints(), None, sample_keypoints()]
    wrists = [Pose.identity()] * 3
    qs = retarget_sequence(chain, spec, hands, wrists, cfg, np.zeros(6))
    np.testing.assert_array_equal(qs[1], qs[0])


def test_sequence_determinism_bitwise():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig()
    rng = np.random.default_rng(10)
    hands = [sample_keypoints(center=rng.uniform(-0.01, 0.01, 3)) for _ in range(20)]
    wrists = [Pose.identity()] * 20
    a = retarget_sequence(chain, spec, hands, wrists, cfg, np.zeros(6))
    b = retarget_sequence(chain, spec, hands, wrists, cfg, np.zeros(6))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
