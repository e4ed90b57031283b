"""Action-chunk execution: temporal aggregation, chunk producers, end gesture.

A producer emits k-step chunks of absolute joint-position commands; every
pending chunk covering the current tick contributes to the command through
exponential weights w_i = exp(-m * i), i ordered from the oldest contributor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, EndOfEpisode, NoChunkCoversTick, NoTarget
from .arm import EndEffectorTarget, IkConfig, arm_chain, solve_arm
from .kinematics import frames_fk
from .model import RobotModel
from .se3 import quat_from_axis_angle


@dataclass(frozen=True)
class ActionChunk:
    start_tick: int
    actions: np.ndarray  # (k, n) absolute joint positions in action-layout order

    @property
    def end_tick(self) -> int:
        return self.start_tick + self.actions.shape[0]

    def covers(self, tick: int) -> bool:
        return self.start_tick <= tick < self.end_tick


class Aggregator:
    """Ring of pending chunks with exponential temporal weighting."""

    def __init__(self, action_dim: int, chunk_size: int = 60, m: float = 0.01):
        self.action_dim = action_dim
        self.chunk_size = chunk_size
        self.m = m
        self.chunks: list[ActionChunk] = []

    def push(self, chunk: ActionChunk) -> None:
        if chunk.actions.ndim != 2 or chunk.actions.shape[1] != self.action_dim:
            raise DimensionMismatch(
                f"chunk is {chunk.actions.shape}, action dim is {self.action_dim}")
        if chunk.actions.shape[0] < 1:
            raise DimensionMismatch("chunk must hold at least one action row")
        # evict chunks whose window ends at or before this chunk's start
        self.chunks = [c for c in self.chunks if c.end_tick > chunk.start_tick]
        self.chunks.append(chunk)

    def seed_hold(self, tick: int, command: np.ndarray) -> None:
        """Replace all pending chunks with one constant chunk at `command`."""
        self.chunks = []
        self.push(ActionChunk(tick, np.tile(np.asarray(command, dtype=float),
                                            (self.chunk_size, 1))))

    def covers(self, tick: int) -> bool:
        return any(c.covers(tick) for c in self.chunks)

    def aggregate(self, tick: int) -> np.ndarray:
        self.chunks = [c for c in self.chunks if c.end_tick > tick]
        contributors = [c for c in self.chunks if c.covers(tick)]
        if not contributors:
            raise NoChunkCoversTick(f"no pending chunk covers tick {tick}")
        contributors.sort(key=lambda c: c.start_tick)
        if len(contributors) == 1:
            c = contributors[0]
            return c.actions[tick - c.start_tick].copy()
        total = np.zeros(self.action_dim)
        weight_sum = 0.0
        for i, c in enumerate(contributors):
            w = math.exp(-self.m * i)
            total += w * c.actions[tick - c.start_tick]
            weight_sum += w
        return total / weight_sum


def aggregate_oracle(chunks: list[ActionChunk], tick: int, m: float) -> np.ndarray:
    """Brute-force recomputation of the weighted average, for verification."""
    live = sorted((c for c in chunks if c.covers(tick)), key=lambda c: c.start_tick)
    if not live:
        raise NoChunkCoversTick(str(tick))
    weights = [math.exp(-m * i) for i in range(len(live))]
    rows = [c.actions[tick - c.start_tick] for c in live]
    return sum(w * r for w, r in zip(weights, rows)) / sum(weights)


# -- ending gesture ------------------------------------------------------------


@dataclass
class EndGesture:
    """Joint-space pose match: command indices, reference values, hold window."""

    indices: tuple[int, ...]
    reference: np.ndarray
    tolerance: float = 0.15
    hold_ticks: int = 30


def default_end_gesture(model: RobotModel) -> EndGesture:
    """Bundled gesture: both shoulders pitched up (arms raised)."""
    names = ("l_shoulder_pitch", "r_shoulder_pitch", "l_elbow", "r_elbow")
    layout = {n: i for i, n in enumerate(model.action_layout)}
    idx = tuple(layout[n] for n in names)
    return EndGesture(idx, np.array([-1.8, -1.8, -0.3, -0.3]))


class GestureDetector:
    """Latches true once the gesture is held for the full window."""

    def __init__(self, gesture: EndGesture):
        self.gesture = gesture
        self.count = 0
        self.detected = False

    def update(self, command: np.ndarray) -> bool:
        g = self.gesture
        err = np.abs(np.asarray(command)[list(g.indices)] - g.reference)
        if float(err.max()) <= g.tolerance:
            self.count += 1
        else:
            self.count = 0
        if self.count >= g.hold_ticks:
            self.detected = True
        return self.detected


# -- scripted pick-and-place producer -------------------------------------------


@dataclass
class PickPlaceConfig:
    chunk_size: int = 60
    pre_grasp_height: float = 0.12
    grasp_height: float = 0.02     # palm above object center at grasp
    lift_height: float = 0.18
    drop_height: float = 0.10
    close_ticks: int = 24
    open_ticks: int = 18
    settle_ticks: int = 6
    speed_scale: float = 0.7       # of the sim's per-joint rate limit
    v_max: float = 3.0
    rate_hz: float = 60.0


_HAND_CLOSED = {
    "thumb_cmc_yaw": 1.0, "thumb_cmc_pitch": 0.4,
    "index_mcp": 1.1, "middle_mcp": 1.1, "ring_mcp": 1.1, "pinky_mcp": 1.1,
}


def _grasp_orientation(side: str) -> np.ndarray:
    # fingers straight down, thumb inward: the zero-posture hand orientation
    return quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), math.pi / 2)


class ScriptedPickPlace:
    """Deterministic can-sorting planner emitting action chunks.

    Sorts graspable objects one at a time into the bin matching their color
    (red -> left bin and arm, otherwise right), then raises both arms into the
    ending gesture. Plans lazily, one object ahead, from the live observation.
    """

    def __init__(self, model: RobotModel, bins: dict[str, np.ndarray],
                 cfg: PickPlaceConfig | None = None,
                 gesture: EndGesture | None = None,
                 start_command: np.ndarray | None = None):
        self.model = model
        self.bins = bins
        self.cfg = cfg or PickPlaceConfig()
        self.gesture = gesture or default_end_gesture(model)
        self.start_command = (None if start_command is None
                              else np.asarray(start_command, dtype=float).copy())
        self.anchor_tick: int | None = None  # session tick of plan index 0
        self.plan: list[np.ndarray] = []
        self.done_ids: set[int] = set()
        self.finished = False
        self._hand_cmd_indices = self._hand_indices()
        # the palm is driven in position with a best-effort orientation pull:
        # wrist limits must never block a grasp, so orientation is unchecked
        self._ik = IkConfig(max_iters=300, pos_tol=1.5e-3, rot_tol=math.tau,
                            rot_weight=0.02)

    def _hand_indices(self) -> dict[str, list[int]]:
        layout = {n: i for i, n in enumerate(self.model.action_layout)}
        out: dict[str, list[int]] = {"left": [], "right": []}
        for side, prefix in (("left", "l"), ("right", "r")):
            for name, i in layout.items():
                if not name.startswith(f"{prefix}_"):
                    continue
                stem = name[2:]
                if stem in _HAND_CLOSED or name == f"{prefix}_gripper":
                    out[side].append(i)
        return out

    def _hand_values(self, side: str, closed: bool) -> np.ndarray:
        prefix = "l" if side == "left" else "r"
        vals = []
        for i in self._hand_cmd_indices[side]:
            name = self.model.action_layout[i]
            if name == f"{prefix}_gripper":
                vals.append(0.0 if closed else 0.05)
            else:
                vals.append(_HAND_CLOSED[name[2:]] if closed else 0.0)
        return np.array(vals)

    # -- trajectory assembly ----------------------------------------------------

    def _append_joint_move(self, cmd_from: np.ndarray, cmd_to: np.ndarray) -> np.ndarray:
        """Linear joint-space move at a fraction of the sim rate limit."""
        delta = float(np.abs(cmd_to - cmd_from).max())
        per_tick = self.cfg.speed_scale * self.cfg.v_max / self.cfg.rate_hz
        ticks = max(int(math.ceil(delta / per_tick)), 2)
        for s in range(1, ticks + 1):
            self.plan.append(cmd_from + (cmd_to - cmd_from) * (s / ticks))
        return cmd_to

    def _append_hold(self, cmd: np.ndarray, ticks: int) -> np.ndarray:
        for _ in range(ticks):
            self.plan.append(cmd.copy())
        return cmd

    def _solve_to(self, q_full: np.ndarray, side: str, palm_target: np.ndarray) -> np.ndarray:
        """Joint posture putting the palm frame at palm_target, fingers downish.

        Continuity first: a restart-free solve stays in the warm start's arm
        branch so consecutive waypoints interpolate without wild sweeps; the
        exploring solver is the fallback for genuinely hard targets.
        """
        prefix = "l" if side == "left" else "r"
        target = EndEffectorTarget(np.asarray(palm_target, dtype=float),
                                   _grasp_orientation(side), side,
                                   frame=f"{prefix}_palm")
        smooth = replace(self._ik, restarts=False, max_iters=150)
        res = solve_arm(self.model, q_full, target, smooth)
        if not res.converged:
            res = solve_arm(self.model, q_full, target, self._ik)
        return res.q

    def _plan_object(self, q_full: np.ndarray, cmd: np.ndarray, obj) -> np.ndarray:
        side = "left" if obj.color[0] >= 128 else "right"
        bin_pos = self.bins[side]
        cfg = self.cfg
        hand_idx = self._hand_cmd_indices[side]
        top = obj.pose.t + np.array([0.0, 0.0, obj.dims[1] / 2 if obj.shape == "cylinder" else obj.dims[2] / 2])
        grasp_point = obj.pose.t + np.array([0.0, 0.0, cfg.grasp_height])

        def arm_cmd(q_full_new, base_cmd, hand_closed):
            c = self.model.q_to_command(q_full_new)
            full = base_cmd.copy()
            chain = arm_chain(self.model, side)
            layout = {n: i for i, n in enumerate(self.model.action_layout)}
            for name in chain.joints:
                full[layout[name]] = c[layout[name]]
            full[hand_idx] = self._hand_values(side, hand_closed)
            return full

        # raise to a safe height first so the traverse clears bins and cans
        prefix = "l" if side == "left" else "r"
        palm_now = frames_fk(self.model, q_full, [f"{prefix}_palm"])[f"{prefix}_palm"].t
        safe_z = grasp_point[2] + cfg.pre_grasp_height + 0.06
        q0s = q_full
        if palm_now[2] < safe_z - 0.02:
            q0s = self._solve_to(q_full, side,
                                 np.array([palm_now[0], palm_now[1], safe_z]))
            cmd = self._append_joint_move(cmd, arm_cmd(q0s, cmd, False))
        # pre-grasp above the object, hand open
        q1 = self._solve_to(q0s, side, grasp_point + np.array([0, 0, cfg.pre_grasp_height]))
        cmd = self._append_joint_move(cmd, arm_cmd(q1, cmd, False))
        # descend to grasp point
        q2 = self._solve_to(q1, side, grasp_point)
        cmd = self._append_joint_move(cmd, arm_cmd(q2, cmd, False))
        # close hand in place
        cmd = self._append_joint_move(cmd, arm_cmd(q2, cmd, True))
        cmd = self._append_hold(cmd, cfg.close_ticks)
        # lift
        q3 = self._solve_to(q2, side, grasp_point + np.array([0, 0, cfg.lift_height]))
        cmd = self._append_joint_move(cmd, arm_cmd(q3, cmd, True))
        # move over the bin
        q4 = self._solve_to(q3, side, bin_pos + np.array([0, 0, cfg.drop_height]))
        cmd = self._append_joint_move(cmd, arm_cmd(q4, cmd, True))
        cmd = self._append_hold(cmd, cfg.settle_ticks)
        # open hand: object settles into the bin
        cmd = self._append_joint_move(cmd, arm_cmd(q4, cmd, False))
        cmd = self._append_hold(cmd, cfg.open_ticks)
        self.done_ids.add(obj.id)
        return cmd

    def _plan_gesture(self, cmd: np.ndarray) -> np.ndarray:
        target = cmd.copy()
        for i, v in zip(self.gesture.indices, self.gesture.reference):
            target[i] = v
        cmd = self._append_joint_move(cmd, target)
        return self._append_hold(cmd, self.gesture.hold_ticks + 12)

    # -- producer interface -------------------------------------------------------

    def chunk(self, observation, tick: int) -> ActionChunk:
        """Next chunk at `tick`; extends the plan when it runs short."""
        cfg = self.cfg
        if self.anchor_tick is None:
            self.anchor_tick = tick
        local = tick - self.anchor_tick
        while len(self.plan) < local + cfg.chunk_size and not self.finished:
            pending = [o for o in observation.objects
                       if o.graspable and o.id not in self.done_ids]
            if self.plan:
                cmd = self.plan[-1]
            elif self.start_command is not None:
                cmd = self.start_command
            else:
                cmd = self.model.q_to_command(observation.q_measured)
            q_full = self.model.command_to_q(cmd, observation.q_measured.copy())
            if pending:
                nearest = min(pending, key=lambda o: (round(float(np.linalg.norm(o.pose.t)), 9), o.id))
                self._plan_object(q_full, cmd, nearest)
            else:
                self._plan_gesture(cmd)
                self.finished = True
        if not self.plan:
            raise NoTarget("no objects and no plan")
        rows = []
        for t in range(local, local + cfg.chunk_size):
            rows.append(self.plan[min(t, len(self.plan) - 1)])
        return ActionChunk(tick, np.stack(rows))

    @property
    def plan_length(self) -> int:
        return len(self.plan)


# -- replay producer -------------------------------------------------------------


def replay_producer(commands: np.ndarray, tick: int, chunk_size: int) -> ActionChunk:
    """Chunk of the next recorded commands, truncated at the episode end."""
    n = commands.shape[0]
    if tick >= n:
        raise EndOfEpisode(f"tick {tick} >= {n} recorded steps")
    return ActionChunk(tick, np.asarray(commands[tick: tick + chunk_size], dtype=float))
