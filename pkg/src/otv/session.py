"""Real-time session: the 60 Hz tick composing mapping, filtering, IK,
retargeting, simulation, emission, and recording; plus the latency harness
and loop statistics. Everything here is wall-clock free: time is tick / rate,
so identical input sequences produce bitwise-identical recorded episodes.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import protocol as proto
from .arm import (
    CalibrationState,
    EndEffectorTarget,
    FilterState,
    IkConfig,
    arm_chain,
    calibrate,
    filter_pose,
    home_posture,
    map_head,
    map_operator_to_targets,
    neck_joints,
    solve_arm,
)
from .config import ServerConfig
from .episode import EpisodeWriter
from .errors import EndOfEpisode, MissingComponent, NoChunkCoversTick, OtvError
from .hand import RetargetingConfig, RetargetingProblem, VectorSpec, compute_human_vectors, retarget_step
from .kinematics import forward_kinematics, frames_fk
from .model import RobotModel
from .opframe import OperatorFrame
from .policy import Aggregator, GestureDetector, ScriptedPickPlace, default_end_gesture, replay_producer
from .render import CameraRig, render_stereo
from .sim import SimWorld


# -- latency harness -------------------------------------------------------------


class LatencyHarness:
    """FIFO delay line with seeded jitter; delivery order is preserved."""

    def __init__(self, delay_ms: float = 0.0, jitter_ms: float = 0.0, seed: int = 0):
        self.delay = delay_ms / 1000.0
        self.jitter = jitter_ms / 1000.0
        self.rng = np.random.default_rng(seed)
        self.queue: deque[tuple[float, object]] = deque()
        self._last_due = -math.inf

    def inject(self, item, now: float) -> None:
        due = now + self.delay
        if self.jitter > 0:
            due += float(self.rng.uniform(0.0, self.jitter))
        due = max(due, self._last_due)  # never reorder
        self._last_due = due
        self.queue.append((due, item))

    def drain(self, now: float) -> list:
        out = []
        while self.queue and self.queue[0][0] <= now:
            out.append(self.queue.popleft()[1])
        return out


# -- statistics --------------------------------------------------------------------


@dataclass
class LoopStats:
    tick_ms: list = field(default_factory=list)
    frames_dropped: int = 0
    frames_received: int = 0
    ik_solves: int = 0
    ik_converged: int = 0
    retarget_calls: int = 0
    retarget_iters: int = 0
    holds: int = 0
    errors: list = field(default_factory=list)

    def note_tick(self, ms: float) -> None:
        self.tick_ms.append(ms)
        if len(self.tick_ms) > 4096:
            del self.tick_ms[: len(self.tick_ms) - 4096]

    def payload(self) -> dict:
        ms = np.asarray(self.tick_ms) if self.tick_ms else np.zeros(1)
        return {
            "tick_ms_mean": float(ms.mean()),
            "tick_ms_p99": float(np.percentile(ms, 99)),
            "frames_dropped": self.frames_dropped,
            "frames_received": self.frames_received,
            "ik_convergence_rate": (self.ik_converged / self.ik_solves
                                    if self.ik_solves else 1.0),
            "retarget_iters_mean": (self.retarget_iters / self.retarget_calls
                                    if self.retarget_calls else 0.0),
            "holds": self.holds,
            "errors": self.errors[-20:],
        }


# -- session -----------------------------------------------------------------------


@dataclass
class HandRuntime:
    chain: RobotModel
    spec: VectorSpec
    cfg: RetargetingConfig
    q: np.ndarray
    cmd_indices: list[int]


class Session:
    """Owns one robot's control state; single-writer, deterministic."""

    def __init__(self, model: RobotModel, world: SimWorld, config: ServerConfig,
                 record_root=None, record_frames: bool = False,
                 task: str = "", created: float = 0.0):
        self.model = model
        self.world = world
        self.config = config
        self.rate = config.rate_hz
        self.dt = 1.0 / config.rate_hz
        self.mode = "idle"
        self.tick_count = 0
        self.calibration: CalibrationState | None = None
        self.filters = {"left": FilterState(config.filter.lam),
                        "right": FilterState(config.filter.lam)}
        self.ik = IkConfig(damping=config.ik.damping, step_clamp=config.ik.step_clamp,
                           gain=config.ik.gain, max_iters=config.ik.max_iters,
                           pos_tol=config.ik.pos_tol, rot_tol=config.ik.rot_tol,
                           w_min=config.ik.w_min, k_n=config.ik.k_n,
                           q_ref=model.mid_q())
        self.q_solution = home_posture(model)
        self.command = model.q_to_command(self.q_solution)
        self.cmd_lo, self.cmd_hi = model.command_limits()
        self.layout_index = {n: i for i, n in enumerate(model.action_layout)}
        self.neck = neck_joints(model)
        self.hands = {side: self._hand_runtime(side) for side in ("left", "right")}
        self.aggregator = Aggregator(model.action_dim,
                                     chunk_size=config.aggregator.chunk_size,
                                     m=config.aggregator.m)
        self.producer: ScriptedPickPlace | None = None
        self.replay_commands: np.ndarray | None = None
        self.gesture = GestureDetector(default_end_gesture(model))
        self.rig = CameraRig(width=config.render.width, height=config.render.height)
        self.frame_stride = max(config.render.stride, 1)
        self.mailbox: proto.OperatorFrameMsg | None = None
        self.last_frame: OperatorFrame | None = None
        self.last_ts = -math.inf
        self.stats = LoopStats()
        self.record_root = record_root
        self.record_frames = record_frames
        self.recorder: EpisodeWriter | None = None
        self.task = task
        self.created = created
        self.episode_count = 0
        self.last_stereo: proto.StereoFrameMsg | None = None

    def _hand_runtime(self, side: str) -> HandRuntime | None:
        prefix = "l" if side == "left" else "r"
        mount = f"{prefix}_hand"
        if mount not in self.model.links:
            return None
        chain = self.model.extract_subchain(mount)
        dexterous = f"{prefix}_thumb_tip" in chain.frames
        spec = VectorSpec.dexterous(prefix) if dexterous else VectorSpec.gripper(prefix)
        spec.validate(chain)
        r = self.config.retargeting
        alpha = r.alpha if r.alpha is not None else (1.1 if dexterous else 1.0)
        cfg = RetargetingConfig(alpha=alpha, beta=r.beta, max_iters=r.max_iters,
                                step_tol=r.step_tol, lm_damping_init=r.lm_damping_init)
        joints = tuple(j.name for j in chain.joints if j.actuated)
        cmd_indices = [self.layout_index[n] for n in joints]
        q = np.array([self.command[i] for i in cmd_indices])
        return HandRuntime(chain, spec, cfg, q, cmd_indices)

    # -- inbound -------------------------------------------------------------------

    def deliver_operator_frame(self, msg: proto.OperatorFrameMsg) -> None:
        """Latest-value mailbox: only the newest frame before a tick survives."""
        self.stats.frames_received += 1
        if msg.timestamp <= self.last_ts:
            self.stats.frames_dropped += 1
            return
        if self.mailbox is not None:
            self.stats.frames_dropped += 1
        self.mailbox = msg

    def handle_control(self, data: dict) -> dict:
        cmd = data.get("cmd")
        if cmd == "ping":
            return {"cmd": "pong", "t": data.get("t")}
        if cmd == "calibrate":
            frame = self.last_frame
            if self.mailbox is not None:
                frame = self.mailbox.to_operator_frame()
            if frame is None:
                return {"cmd": "calibrate", "ok": False, "error": "no operator frame yet"}
            try:
                self.calibration = calibrate(frame)
            except MissingComponent as e:
                return {"cmd": "calibrate", "ok": False, "error": str(e)}
            return {"cmd": "calibrate", "ok": True}
        if cmd == "set_mode":
            mode = data.get("mode")
            if mode not in ("teleop", "autonomous", "idle"):
                return {"cmd": "set_mode", "ok": False, "error": f"bad mode {mode!r}"}
            self._switch_mode(mode)
            return {"cmd": "set_mode", "ok": True, "mode": mode}
        if cmd == "reset_scene":
            seed = int(data.get("seed", self.world.seed))
            self.world = SimWorld(self.model, self.world.spec, seed=seed,
                                  q0=self.world.q_measured,
                                  grasp=self.world.grasp_cfg)
            return {"cmd": "reset_scene", "ok": True, "seed": seed}
        if cmd == "start_recording":
            if self.recorder is not None:
                return {"cmd": "start_recording", "ok": False, "error": "already recording"}
            if self.record_root is None:
                return {"cmd": "start_recording", "ok": False, "error": "no record dir configured"}
            name = data.get("name") or f"episode_{self.episode_count:03d}"
            self.episode_count += 1
            self.recorder = EpisodeWriter(
                f"{self.record_root}/{name}", robot=self.model.name,
                action_dim=self.model.action_dim, rate_hz=self.rate,
                task=data.get("task", self.task), operator_block=True,
                frames=self.record_frames, created=self.created)
            return {"cmd": "start_recording", "ok": True, "name": name}
        if cmd == "stop_recording":
            meta = self.stop_recording()
            if meta is None:
                return {"cmd": "stop_recording", "ok": False, "error": "not recording"}
            return {"cmd": "stop_recording", "ok": True, "num_steps": meta.num_steps}
        if cmd == "get_stats":
            payload = self.stats.payload()
            if data.get("debug"):
                payload["frame_poses"] = self._debug_frame_poses()
            return {"cmd": "stats", "stats": payload}
        return {"cmd": str(cmd), "ok": False, "error": "unknown control command"}

    def _debug_frame_poses(self) -> dict:
        names = [n for n in ("head", "l_ee", "r_ee", "l_palm", "r_palm")
                 if n in self.model.frames]
        out = {}
        for name, pose in frames_fk(self.model, self.world.q_measured, names).items():
            out[name] = [float(x) for x in np.concatenate([pose.q, pose.t])]
        return out

    def _switch_mode(self, mode: str) -> None:
        if mode == self.mode:
            return
        self.mode = mode
        # continuity: pending chunks are replaced by a hold at the current
        # command so the stream cannot jump at the switch tick
        self.aggregator.seed_hold(self.tick_count, self.command)
        if mode == "autonomous" and self.producer is None:
            self.attach_scripted_producer()

    def attach_scripted_producer(self) -> None:
        try:
            bins = {"left": self.world.find_object("bin_left").pose.t + np.array([0, 0, 0.05]),
                    "right": self.world.find_object("bin_right").pose.t + np.array([0, 0, 0.05])}
        except KeyError:
            return
        from .policy import PickPlaceConfig

        self.producer = ScriptedPickPlace(
            self.model, bins,
            PickPlaceConfig(chunk_size=self.aggregator.chunk_size),
            gesture=self.gesture.gesture,
            start_command=self.command)

    def attach_replay(self, commands: np.ndarray) -> None:
        self.replay_commands = np.asarray(commands, dtype=float)

    def start_replay(self, commands: np.ndarray) -> None:
        """Autonomous replay from tick 0; the episode owns the whole stream,
        so no continuity hold chunk is seeded."""
        self.mode = "autonomous"
        self.producer = None
        self.aggregator.chunks = []
        self.attach_replay(commands)

    def stop_recording(self):
        if self.recorder is None:
            return None
        meta = self.recorder.finalize()
        self.recorder = None
        return meta

    # -- the tick --------------------------------------------------------------------

    def _teleop_command(self, frame: OperatorFrame) -> np.ndarray:
        cmd = self.command.copy()
        cal = self.calibration
        if cal is None or frame.head is None:
            return cmd
        neck_cmd = map_head(frame.head, cal, self.model)
        for (name, _), value in zip(self.neck, neck_cmd):
            cmd[self.layout_index[name]] = value
        q_tmp = self.q_solution.copy()
        for (name, _), value in zip(self.neck, neck_cmd):
            q_tmp[self.model.joint_index[name]] = value
        head_pose = forward_kinematics(self.model, q_tmp, "head")
        left, right = map_operator_to_targets(frame, cal, head_pose)
        for side, target in (("left", left), ("right", right)):
            if target is None:
                continue
            filtered = filter_pose(self.filters[side], target.pose())
            t2 = EndEffectorTarget(filtered.t, filtered.q, side, target.clamped)
            res = solve_arm(self.model, self.q_solution, t2, self.ik)
            self.stats.ik_solves += 1
            self.stats.ik_converged += int(res.converged)
            self.q_solution = res.q
            chain = arm_chain(self.model, side)
            for name in chain.joints:
                cmd[self.layout_index[name]] = res.q[self.model.joint_index[name]]
            hand = self.hands[side]
            kp = frame.hand(side)
            if hand is not None and kp is not None and kp.is_sane() and frame.wrist(side) is not None:
                targets = compute_human_vectors(kp, frame.wrist(side), hand.spec, hand.cfg.alpha)
                result = retarget_step(RetargetingProblem(hand.chain, hand.spec, targets, hand.q),
                                       hand.cfg)
                self.stats.retarget_calls += 1
                self.stats.retarget_iters += result.iterations
                hand.q = result.q
                for i, v in zip(hand.cmd_indices, result.q):
                    cmd[i] = v
        return cmd

    def _autonomous_command(self) -> np.ndarray:
        tick = self.tick_count
        if self.replay_commands is not None:
            try:
                chunk = replay_producer(self.replay_commands, tick,
                                        self.aggregator.chunk_size)
                # replay pushes non-overlapping chunks so the recorded commands
                # reproduce bitwise through the single-contributor fast path
                if tick % self.aggregator.chunk_size == 0:
                    self.aggregator.push(chunk)
            except EndOfEpisode:
                pass
        elif self.producer is not None and not self.producer.finished:
            self.aggregator.push(self.producer.chunk(self.world.observe(), tick))
        elif self.producer is not None and self.producer.finished:
            # keep feeding the tail so the gesture hold completes
            self.aggregator.push(self.producer.chunk(self.world.observe(), tick))
        try:
            return self.aggregator.aggregate(tick)
        except NoChunkCoversTick:
            self.stats.holds += 1
            return self.command.copy()

    def tick(self) -> list[proto.Message]:
        t_start = time.perf_counter()
        tick = self.tick_count
        now_s = tick / self.rate

        msg = self.mailbox
        self.mailbox = None
        frame: OperatorFrame | None = None
        if msg is not None:
            frame = msg.to_operator_frame()
            self.last_frame = frame
            self.last_ts = msg.timestamp

        if self.mode == "teleop" and frame is not None:
            try:
                command = self._teleop_command(frame)
            except OtvError as e:
                self.stats.errors.append(f"tick {tick}: {e}")
                self.stats.holds += 1
                command = self.command.copy()
        elif self.mode == "autonomous":
            command = self._autonomous_command()
        else:
            command = self.command.copy()
            if self.mode == "teleop":
                self.stats.holds += 1

        command = np.clip(command, self.cmd_lo, self.cmd_hi)
        if not np.all(np.isfinite(command)):
            self.stats.errors.append(f"tick {tick}: non-finite command held")
            self.stats.holds += 1
            command = self.command.copy()
        self.command = command

        self.world.step(command, self.dt)
        self.world.update_grasp()
        if self.mode == "autonomous":
            self.gesture.update(command)
            if self.gesture.detected and self.recorder is not None:
                self.stop_recording()

        measured = self.model.q_to_command(self.world.q_measured)
        out: list[proto.Message] = [
            proto.JointStateMsg(now_s, command.astype("<f4"), measured.astype("<f4")),
            self._scene_msg(),
        ]
        rendered_index = None
        if tick % self.frame_stride == 0:
            stereo = render_stereo(self.model, self.world.q_measured,
                                   self.world.objects, self.rig)
            self.last_stereo = proto.StereoFrameMsg(
                self.rig.width, self.rig.height, 0,
                stereo.left.tobytes(), stereo.right.tobytes())
            out.append(self.last_stereo)
            rendered_index = tick
            if self.recorder is not None and self.record_frames:
                self.recorder.write_stereo_ppm(tick, stereo.left, stereo.right)

        if self.recorder is not None:
            op = None
            if msg is not None:
                op = {"head": msg.head, "wrist_left": msg.wrist_left,
                      "wrist_right": msg.wrist_right, "hand_left": msg.hand_left,
                      "hand_right": msg.hand_right, "validity": msg.validity}
            self.recorder.record_step(tick, now_s, measured, command, operator=op,
                                      frame_index=rendered_index)

        self.tick_count += 1
        self.stats.note_tick((time.perf_counter() - t_start) * 1000.0)
        if tick % 60 == 0:
            out.append(proto.StatsMsg({"cmd": "stats", "stats": self.stats.payload()}))
        return out

    def _scene_msg(self) -> proto.SceneStateMsg:
        objs = []
        for o in self.world.objects:
            dims3 = np.zeros(3, dtype="<f4")
            dims3[: len(o.dims)] = o.dims
            objs.append(proto.SceneObjectState(
                o.id, proto.SHAPE_CODES[o.shape], dims3,
                np.concatenate([o.pose.q, o.pose.t]).astype("<f4"),
                o.color.astype(np.uint8),
                1 if o.id in self.world.attachments else 0))
        return proto.SceneStateMsg(objs)


def build_session(config: ServerConfig, record_root=None, record_frames=False,
                  task: str = "", created: float = 0.0) -> Session:
    from .model import load_robot_model
    from .paths import model_path, scene_path
    from .scene import load_scene

    model = load_robot_model(model_path(config.robot_model))
    spec = load_scene(scene_path(config.scene))
    world = SimWorld(model, spec, seed=config.seed, q0=home_posture(model))
    return Session(model, world, config, record_root=record_root,
                   record_frames=record_frames, task=task, created=created)
