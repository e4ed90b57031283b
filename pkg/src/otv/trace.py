"""Synthetic operator traces: JSON event scripts driven through a session.

Trace document:
    {"robot": "h1", "scene": "can_sorting", "seed": 0, "ticks": 600,
     "config": {...optional ServerConfig overrides...},
     "events": [{"tick": 0, "frame": {...}} | {"tick": 1, "control": {...}}]}

Frame entries carry "timestamp" plus optional "head", "wrist_left",
"wrist_right" (7 numbers: qw qx qy qz tx ty tz) and "hand_left", "hand_right"
(6x3 keypoints); omitted components are marked invalid on the wire. Sessions
are wall-clock free, so a trace always reproduces the same episode bytes.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import protocol as proto
from .config import config_from_dict
from .kinematics import frames_fk
from .model import RobotModel, load_robot_model
from .paths import model_path
from .session import Session, build_session


def frame_msg_from_doc(doc: dict) -> proto.OperatorFrameMsg:
    def pose7(key: str, bit: int):
        v = doc.get(key)
        if v is None:
            return np.zeros(7, dtype="<f4"), 0
        return np.asarray(v, dtype="<f4").reshape(7), bit

    def hand(key: str, bit: int):
        v = doc.get(key)
        if v is None:
            return np.zeros((6, 3), dtype="<f4"), 0
        return np.asarray(v, dtype="<f4").reshape(6, 3), bit

    validity = 0
    head, b = pose7("head", proto.VALID_HEAD)
    validity |= b
    wl, b = pose7("wrist_left", proto.VALID_WRIST_LEFT)
    validity |= b
    wr, b = pose7("wrist_right", proto.VALID_WRIST_RIGHT)
    validity |= b
    hl, b = hand("hand_left", proto.VALID_HAND_LEFT)
    validity |= b
    hr, b = hand("hand_right", proto.VALID_HAND_RIGHT)
    validity |= b
    return proto.OperatorFrameMsg(float(doc["timestamp"]), head, wl, wr, hl, hr, validity)


def run_trace(doc: dict, record_root=None, record_frames: bool = False) -> Session:
    """Execute a trace; any recording is finalized before returning."""
    cfg = config_from_dict(doc.get("config", {}))
    cfg.robot_model = doc.get("robot", cfg.robot_model)
    cfg.scene = doc.get("scene", cfg.scene)
    cfg.seed = int(doc.get("seed", cfg.seed))
    session = build_session(cfg, record_root=record_root, record_frames=record_frames,
                            task=doc.get("task", "trace"), created=0.0)
    by_tick: dict[int, list[dict]] = {}
    for ev in doc.get("events", []):
        by_tick.setdefault(int(ev["tick"]), []).append(ev)
    for tick in range(int(doc["ticks"])):
        for ev in by_tick.get(tick, ()):
            if "frame" in ev:
                session.deliver_operator_frame(frame_msg_from_doc(ev["frame"]))
            if "control" in ev:
                session.handle_control(ev["control"])
        session.tick()
    session.stop_recording()
    return session


def load_trace(path) -> dict:
    with open(path) as f:
        return json.load(f)


# -- bundled wave trace ----------------------------------------------------------


def _hand_keypoint_sets(model: RobotModel, prefix: str, alpha: float):
    """Open/closed human keypoint sets derived from the robot hand's own FK.

    Dividing the robot tip positions by alpha makes the synthetic operator's
    hand geometry consistent with the retargeting scale.
    """
    chain = model.extract_subchain(f"{prefix}_hand")
    tips = [f"{prefix}_{n}" for n in ("thumb_tip", "index_tip", "middle_tip",
                                      "ring_tip", "pinky_tip")]

    def keypoints(q_act: dict) -> np.ndarray:
        q = chain.zero_q()
        for name, v in q_act.items():
            q[chain.joint_index[f"{prefix}_{name}"]] = v
        fr = frames_fk(chain, q, tips)
        out = [np.zeros(3)]
        out += [fr[t].t / alpha for t in tips]
        return np.stack(out)

    open_set = keypoints({})
    closed = {"thumb_cmc_yaw": 1.0, "thumb_cmc_pitch": 0.4, "index_mcp": 1.1,
              "middle_mcp": 1.1, "ring_mcp": 1.1, "pinky_mcp": 1.1}
    if f"{prefix}_gripper" in chain.joint_index:
        open_set = None  # gripper models use a parametric pinch instead
    return open_set, (keypoints(closed) if open_set is not None else None)


def generate_wave_trace(robot: str = "h1", ticks: int = 780) -> dict:
    """Deterministic teleop trace: look around, wave the right arm, pinch,
    then hand over to the scripted producer mid-run."""
    model = load_robot_model(model_path(robot))
    alpha = 1.1
    open_l, closed_l = _hand_keypoint_sets(model, "l", alpha)
    open_r, closed_r = _hand_keypoint_sets(model, "r", alpha)

    head0 = np.array([1, 0, 0, 0, 0.0, 0.0, 0.0])
    wrist_l0 = np.array([1, 0, 0, 0, 0.30, 0.24, -0.30])
    wrist_r0 = np.array([1, 0, 0, 0, 0.30, -0.24, -0.30])

    def hand_doc(side: str, wrist7, pinch: float):
        opened, closed = (open_l, closed_l) if side == "left" else (open_r, closed_r)
        local = (1 - pinch) * opened + pinch * closed
        world = local + np.asarray(wrist7[4:])
        return [[round(float(x), 6) for x in p] for p in world]

    def yaw_quat(angle: float):
        return [math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2)]

    events = []

    def frame(tick: int, head7, wl7, wr7, pinch_l: float, pinch_r: float):
        events.append({"tick": tick, "frame": {
            "timestamp": round(tick / 60.0, 9),
            "head": [round(float(x), 6) for x in head7],
            "wrist_left": [round(float(x), 6) for x in wl7],
            "wrist_right": [round(float(x), 6) for x in wr7],
            "hand_left": hand_doc("left", wl7, pinch_l),
            "hand_right": hand_doc("right", wr7, pinch_r),
        }})

    frame(0, head0, wrist_l0, wrist_r0, 0.0, 0.0)
    events.append({"tick": 1, "control": {"cmd": "calibrate"}})
    events.append({"tick": 2, "control": {"cmd": "set_mode", "mode": "teleop"}})
    events.append({"tick": 4, "control": {"cmd": "start_recording", "name": "golden"}})

    switch_tick = 420
    for t in range(5, switch_tick):
        phase = (t - 5) / 60.0
        head = head0.copy()
        head[:4] = yaw_quat(0.25 * math.sin(2 * math.pi * phase / 4.0))
        wl = wrist_l0.copy()
        wl[6] += 0.04 * math.sin(2 * math.pi * phase / 5.0)
        wr = wrist_r0.copy()
        wr[5] += 0.06 * math.cos(2 * math.pi * phase / 3.0) - 0.06
        wr[6] += 0.06 * math.sin(2 * math.pi * phase / 3.0)
        pinch_r = 0.5 - 0.5 * math.cos(2 * math.pi * phase / 2.0)
        frame(t, head, wl, wr, 0.0, round(pinch_r, 6))

    events.append({"tick": switch_tick,
                   "control": {"cmd": "set_mode", "mode": "autonomous"}})

    return {
        "robot": robot,
        "scene": "can_sorting",
        "seed": 0,
        "task": "wave",
        "ticks": ticks,
        "config": {},
        "events": events,
    }
