"""Acceptance criteria, one test per criterion, each printing PASS/FAIL."""

import math
import time

import numpy as np

from otv import protocol as proto
from otv.arm import IkConfig, arm_chain, home_posture, nullspace_correction
from otv.episode import load_episode
from otv.errors import CodecError
from otv.hand import (
    RetargetingConfig,
    RetargetingProblem,
    VectorSpec,
    compute_human_vectors,
    retarget_step,
)
from otv.kinematics import forward_kinematics, jacobian, manipulability
from otv.model import load_robot_model
from otv.paths import model_path, scene_path, trace_path
from otv.policy import ActionChunk, Aggregator, aggregate_oracle
from otv.scene import load_scene
from otv.se3 import Pose, se3_compose, se3_inverse, se3_log
from otv.trace import frame_msg_from_doc, load_trace, run_trace

from _util import run_ik_harness, run_sorting, sorting_run_ok
from test_hand import left_gripper_chain, left_hand_chain, pinch_keypoints, random_q_act, robot_vectors
from test_session import fresh_session, measure_operator_to_command_latency, operator_doc, start_teleop


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# -- 1. kinematics ----------------------------------------------------------------


def test_acceptance_kinematics_jacobian_fd():
    t0 = time.perf_counter()
    h = 1e-6
    worst = 0.0
    for model_name, frames in (("h1", ("l_ee", "r_ee", "l_index_tip", "head")),
                               ("gr1", ("l_ee", "r_ee", "l_gripper_upper", "head"))):
        model = load_robot_model(model_path(model_name))
        joints = tuple(n for n in model.movable_names
                       if model.joint_index[n] not in model.driven_index)
        rng = np.random.default_rng(42)
        margin = 0.05 * (model.upper - model.lower)
        for i in range(100):
            q = rng.uniform(model.lower + margin, model.upper - margin)
            frame = frames[i % len(frames)]
            j = jacobian(model, q, frame, joints)
            delta = rng.normal(size=len(joints))
            delta /= np.linalg.norm(delta)
            qp, qm = q.copy(), q.copy()
            for name, d in zip(joints, delta):
                qp[model.joint_index[name]] += h * d
                qm[model.joint_index[name]] -= h * d
            tp = forward_kinematics(model, qp, frame)
            tm = forward_kinematics(model, qm, frame)
            tw = se3_log(se3_compose(se3_inverse(tm), tp)).as_vector() / (2 * h)
            worst = max(worst, float(np.abs(j @ delta - tw).max()))
    elapsed = time.perf_counter() - t0
    report("kinematics: Jacobian vs central differences",
           worst < 1e-5 and elapsed < 5.0,
           f"max err {worst:.2e}, {elapsed:.2f}s")


# -- 2. IK --------------------------------------------------------------------------


def test_acceptance_ik_convergence():
    model = load_robot_model(model_path("h1"))
    results = run_ik_harness(model, "left", seeds=range(100))
    ok = sum(r.converged for r in results)
    report("ik: seeded reachable targets converge", ok >= 99, f"{ok}/100")


def test_acceptance_ik_nullspace_projection():
    model = load_robot_model(model_path("h1"))
    chain = arm_chain(model, "left")
    idx = list(chain.q_indices)
    rng = np.random.default_rng(7)
    worst = 0.0
    checked = 0
    while checked < 100:
        q = home_posture(model).copy()
        q[idx] = rng.normal(scale=0.02, size=7)
        j = jacobian(model, q, chain.ee_frame, chain.joints)
        if manipulability(j) >= 1e-3:
            continue
        v = nullspace_correction(model, q, model.mid_q(), j, IkConfig(), chain.joints)[idx]
        ratio = float(np.linalg.norm(j @ v)) / max(float(np.linalg.norm(v)), 1e-9)
        worst = max(worst, ratio)
        checked += 1
    report("ik: nullspace correction leaves the end-effector still",
           worst <= 1e-6, f"max |Jv|/|v| {worst:.2e}")


# -- 3. retargeting -----------------------------------------------------------------


def test_acceptance_retargeting_round_trip():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    cfg = RetargetingConfig(alpha=1.1, beta=0.0)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(100):
        q_star = random_q_act(chain, rng)
        targets = robot_vectors(chain, spec, q_star)
        prob0 = RetargetingProblem(chain, spec, targets, q_star)
        lo, hi = prob0.limits()
        q_prev = np.clip(q_star + rng.uniform(-0.1, 0.1, size=q_star.size), lo, hi)
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
        stacked = float(np.linalg.norm(targets - robot_vectors(chain, spec, res.q)))
        if stacked < 1e-3:
            hits += 1
    report("retargeting: round-trip recovery at alpha=1.1", hits >= 95, f"{hits}/100")


def test_acceptance_retargeting_huge_beta():
    chain = left_hand_chain()
    spec = VectorSpec.dexterous("l")
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        q_prev = random_q_act(chain, rng)
        targets = rng.uniform(-0.1, 0.1, size=(7, 3))
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev),
                            RetargetingConfig(beta=1e6))
        worst = max(worst, float(np.abs(res.q - q_prev).max()))
    report("retargeting: beta=1e6 returns q_prev", worst < 1e-4, f"max dev {worst:.2e}")


def test_acceptance_gripper_monotone():
    chain = left_gripper_chain()
    spec = VectorSpec.gripper("l")
    cfg = RetargetingConfig(alpha=1.0)
    q_prev = np.zeros(1)
    qs = []
    for d in np.linspace(0.0, 0.12, 25):
        targets = compute_human_vectors(pinch_keypoints(d), Pose.identity(), spec, cfg.alpha)
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
        q_prev = res.q
        qs.append(float(res.q[0]))
    strictly = all(b > a for a, b in zip(qs, qs[1:]))
    report("retargeting: gripper pinch map strictly monotone 0..0.12 m",
           strictly and qs[0] == 0.0, f"q range [{qs[0]:.4f}, {qs[-1]:.4f}]")


# -- 4. temporal aggregation ----------------------------------------------------------


def test_acceptance_aggregation_oracle():
    rng = np.random.default_rng(13)
    ms = [0.0, 0.005, 0.01, 0.05]
    ks = [1, 60, 100]
    worst = 0.0
    combos_hit = set()
    for case in range(10_000):
        m = ms[case % 4]
        k = ks[(case // 4) % 3]
        combos_hit.add((m, k))
        agg = Aggregator(action_dim=3, chunk_size=k, m=m)
        count = int(rng.integers(1, min(k, 12) + 1))
        start = int(rng.integers(0, 30))
        for i in range(count):
            agg.push(ActionChunk(start + i, rng.normal(size=(k, 3))))
        last_start = start + count - 1
        tick = int(rng.integers(last_start, start + k))
        got = agg.aggregate(tick)
        want = aggregate_oracle(agg.chunks, tick, m)
        worst = max(worst, float(np.abs(got - want).max()))
    report("aggregation: matches brute-force oracle over 1e4 histories",
           worst < 1e-9 and len(combos_hit) == 12, f"max dev {worst:.2e}")


# -- 5. protocol ------------------------------------------------------------------------


def _random_message(rng) -> proto.Message:
    kind = rng.integers(0, 7)
    if kind == 0:
        return proto.HelloMsg({"role": "viewer", "n": int(rng.integers(0, 9))})
    if kind == 1:
        return proto.ControlMsg({"cmd": "ping", "t": float(rng.uniform(0, 1))})
    if kind == 2:
        return proto.StatsMsg({"stats": {"x": int(rng.integers(0, 100))}})
    if kind == 3:
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        pose = np.concatenate([q, rng.normal(size=3)]).astype("<f4")
        return proto.OperatorFrameMsg(
            float(rng.uniform(0, 100)), pose.copy(), pose.copy(), pose.copy(),
            rng.normal(size=(6, 3)).astype("<f4"),
            rng.normal(size=(6, 3)).astype("<f4"), int(rng.integers(0, 32)))
    if kind == 4:
        n = int(rng.integers(1, 40))
        return proto.JointStateMsg(float(rng.uniform(0, 10)),
                                   rng.normal(size=n).astype("<f4"),
                                   rng.normal(size=n).astype("<f4"))
    if kind == 5:
        objs = [proto.SceneObjectState(int(rng.integers(0, 9)), int(rng.integers(0, 2)),
                                       rng.uniform(0.01, 1, 3).astype("<f4"),
                                       rng.normal(size=7).astype("<f4"),
                                       rng.integers(0, 256, 4).astype(np.uint8),
                                       int(rng.integers(0, 2)))
                for _ in range(int(rng.integers(0, 5)))]
        return proto.SceneStateMsg(objs)
    w, h = int(rng.integers(1, 8)), int(rng.integers(1, 8))
    data = rng.integers(0, 256, w * h * 3, dtype=np.uint8).tobytes()
    return proto.StereoFrameMsg(w, h, 0, data, data[::-1])


def test_acceptance_protocol_round_trip_and_fuzz():
    rng = np.random.default_rng(14)
    for _ in range(2000):
        m = _random_message(rng)
        raw = proto.encode_message(m)
        back = proto.decode_message(raw)
        assert back == m and proto.encode_message(back) == raw
    crashes = 0
    base = proto.encode_message(_random_message(np.random.default_rng(1)))
    for case in range(100_000):
        if case % 2 == 0:
            raw = rng.integers(0, 256, int(rng.integers(0, 300)), dtype=np.uint8).tobytes()
        else:
            buf = bytearray(base)
            for _ in range(int(rng.integers(1, 5))):
                pos = int(rng.integers(0, max(len(buf), 1)))
                op = rng.integers(0, 3)
                if op == 0 and buf:
                    buf[pos % len(buf)] = int(rng.integers(0, 256))
                elif op == 1:
                    del buf[pos: pos + int(rng.integers(1, 8))]
                else:
                    buf[pos:pos] = bytes(rng.integers(0, 256, int(rng.integers(1, 4))))
            raw = bytes(buf)
        try:
            proto.decode_message(raw)
        except CodecError:
            pass
        except Exception:
            crashes += 1
    report("protocol: round-trip identity and 1e5-case fuzz", crashes == 0,
           f"{crashes} crashes")


# -- 6. end-to-end golden trace -----------------------------------------------------------


def test_acceptance_golden_trace(tmp_path):
    doc = load_trace(trace_path("wave.json"))
    run_trace(doc, record_root=tmp_path / "a")
    run_trace(doc, record_root=tmp_path / "b")
    a = (tmp_path / "a" / "golden" / "steps.bin").read_bytes()
    b = (tmp_path / "b" / "golden" / "steps.bin").read_bytes()
    committed = trace_path("wave_golden_steps.bin").read_bytes()
    identical = a == b == committed

    ep = load_episode(tmp_path / "a" / "golden")
    cmds = ep.commands
    ticks = ep.records["tick"]
    switch = int(np.nonzero(ticks == 420)[0][0])
    jump = float(np.abs(cmds[switch] - cmds[switch - 1]).max())
    bound = 3.0 / 60.0
    report("end-to-end: golden trace bitwise identical + bounded mode switch",
           identical and jump <= bound,
           f"identical={identical}, switch jump {jump:.4f} <= {bound:.4f}")


# -- 7. autonomous can sorting ---------------------------------------------------------------


def test_acceptance_autonomous_sorting():
    model = load_robot_model(model_path("h1"))
    spec = load_scene(scene_path("can_sorting"))
    t0 = time.perf_counter()
    passed = 0
    for seed in range(10):
        world, det, _, _ = run_sorting(model, spec, seed)
        passed += sorting_run_ok(world, det)
    elapsed = time.perf_counter() - t0
    report("autonomous: 10 seeded can-sorting runs", passed == 10 and elapsed < 60.0,
           f"{passed}/10 in {elapsed:.1f}s")


# -- 8. loop budget -----------------------------------------------------------------------


def test_acceptance_loop_budget():
    session = fresh_session()
    start_teleop(session)
    nan_free = True
    t0 = time.perf_counter()
    for k in range(1, 601):
        t = k / 60.0
        session.deliver_operator_frame(frame_msg_from_doc(operator_doc(
            t, wr_y=-0.24 + 0.05 * math.sin(k / 15), head_yaw=0.2 * math.sin(k / 40))))
        session.tick()
        nan_free &= bool(np.all(np.isfinite(session.command)))
    elapsed = time.perf_counter() - t0
    mean_ms = elapsed / 600 * 1000
    report("loop: 10 s synthetic session at 60 Hz", mean_ms < 16.6 and nan_free,
           f"mean tick {mean_ms:.2f} ms, nan_free={nan_free}")


# -- 9. latency harness -------------------------------------------------------------------


def test_acceptance_latency_harness():
    measured = measure_operator_to_command_latency(40.0)
    lo, hi = 0.080, 0.080 + 2 / 60.0
    report("latency: 40 ms each way lands in [80, 80+2 ticks] ms",
           lo <= measured <= hi + 1e-9, f"measured {measured * 1000:.1f} ms")
