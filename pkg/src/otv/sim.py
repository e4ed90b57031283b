"""Kinematic robot/scene simulator: rate-limited joint tracking, hysteretic
grasping, and rigid attachments. No contact dynamics; released objects settle
onto the highest supporting box under them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch
from .kinematics import frame_positions, frames_fk
from .model import RobotModel
from .scene import SceneObject, SceneSpec, place_objects
from .se3 import Pose, se3_compose, se3_inverse


@dataclass
class GraspConfig:
    c_grasp: float = 0.6      # normalized closure to attach
    c_release: float = 0.4    # normalized closure to detach (hysteresis)
    r_grasp: float = 0.08     # palm-to-object-center attach radius, m
    v_max: float = 3.0        # per-joint rate limit, rad/s or m/s


@dataclass(frozen=True)
class SimObservation:
    tick: int
    q_measured: np.ndarray
    objects: tuple[SceneObject, ...]
    attached: dict[int, str]


@dataclass(frozen=True)
class GraspEvent:
    tick: int
    object_id: int
    side: str
    kind: str  # "attach" | "release"
    position: np.ndarray


class SimWorld:
    """Mutable simulation state; all methods are deterministic."""

    def __init__(self, model: RobotModel, spec: SceneSpec, seed: int = 0,
                 grasp: GraspConfig | None = None,
                 q0: np.ndarray | None = None):
        self.model = model
        self.spec = spec
        self.seed = seed
        self.grasp_cfg = grasp or GraspConfig()
        self.q_measured = model.apply_couplings(
            model.clamp(q0.copy() if q0 is not None else model.zero_q()))
        self.q_target = self.q_measured.copy()
        self.objects: list[SceneObject] = place_objects(spec, seed)
        self.attachments: dict[int, tuple[str, Pose]] = {}
        self.tick = 0
        self.events: list[GraspEvent] = []
        self._sides = self._detect_sides()
        self._d_max = {s: self._max_separation(s) for s in self._sides}

    # -- hand instrumentation ---------------------------------------------------

    def _detect_sides(self) -> dict[str, dict]:
        sides = {}
        for side, p in (("left", "l"), ("right", "r")):
            if f"{p}_palm" not in self.model.frames:
                continue
            if f"{p}_gripper_upper" in self.model.frames:
                pinch = (f"{p}_gripper_upper", f"{p}_gripper_lower")
            else:
                pinch = (f"{p}_thumb_tip", f"{p}_index_tip")
            sides[side] = {"palm": f"{p}_palm", "pinch": pinch}
        return sides

    def _separation(self, side: str, q: np.ndarray) -> float:
        a, b = self._sides[side]["pinch"]
        fr = frame_positions(self.model, q, [a, b])
        return float(np.linalg.norm(fr[a] - fr[b]))

    def _max_separation(self, side: str) -> float:
        lo = self._separation(side, self.model.lower.copy())
        hi = self._separation(side, self.model.upper.copy())
        return max(lo, hi, 1e-9)

    def closure(self, side: str) -> float:
        """1 = fully closed pinch, 0 = fully open."""
        d = self._separation(side, self.q_measured)
        return float(np.clip(1.0 - d / self._d_max[side], 0.0, 1.0))

    def palm_pose(self, side: str) -> Pose:
        return frames_fk(self.model, self.q_measured, [self._sides[side]["palm"]])[
            self._sides[side]["palm"]]

    # -- stepping -----------------------------------------------------------------

    def step(self, command: np.ndarray, dt: float) -> None:
        """Move joints toward the command at most v_max * dt per joint."""
        command = np.asarray(command, dtype=float)
        if command.shape != (self.model.action_dim,):
            raise DimensionMismatch(
                f"command shape {command.shape}, expected ({self.model.action_dim},)")
        self.q_target = self.model.clamp(
            self.model.command_to_q(command, self.q_measured.copy()))
        limit = self.grasp_cfg.v_max * dt
        delta = np.clip(self.q_target - self.q_measured, -limit, limit)
        q = self.model.clamp(self.q_measured + delta)
        self.q_measured = self.model.apply_couplings(q)
        self.tick += 1
        self._update_attached_poses()

    def _update_attached_poses(self) -> None:
        for oid, (side, rel) in self.attachments.items():
            self._set_object_pose(oid, se3_compose(self.palm_pose(side), rel))

    def _object(self, oid: int) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def _set_object_pose(self, oid: int, pose: Pose) -> None:
        for i, o in enumerate(self.objects):
            if o.id == oid:
                self.objects[i] = replace(o, pose=pose)
                return

    # -- grasping -----------------------------------------------------------------

    def update_grasp(self) -> None:
        """Attach/detach objects per closure thresholds with hysteresis."""
        cfg = self.grasp_cfg
        for side in self._sides:
            closure = self.closure(side)
            held = [oid for oid, (s, _) in self.attachments.items() if s == side]
            if held:
                if closure < cfg.c_release:
                    for oid in held:
                        del self.attachments[oid]
                        self._settle(oid)
                        self.events.append(GraspEvent(
                            self.tick, oid, side, "release",
                            self._object(oid).pose.t.copy()))
                continue
            if closure <= cfg.c_grasp:
                continue
            palm = self.palm_pose(side)
            candidates = [
                o for o in self.objects
                if o.graspable and o.id not in self.attachments
                and float(np.linalg.norm(o.pose.t - palm.t)) <= cfg.r_grasp
            ]
            if not candidates:
                continue
            best = min(candidates,
                       key=lambda o: (float(np.linalg.norm(o.pose.t - palm.t)), o.id))
            rel = se3_compose(se3_inverse(palm), best.pose)
            self.attachments[best.id] = (side, rel)
            self.events.append(GraspEvent(self.tick, best.id, side, "attach",
                                          best.pose.t.copy()))

    def _settle(self, oid: int) -> None:
        """Drop a released object onto the highest box top under its center."""
        obj = self._object(oid)
        x, y = obj.pose.t[:2]
        support = None
        for o in self.objects:
            if o.id == oid or o.shape != "box" or o.graspable:
                continue
            hx, hy = o.xy_extent()
            if abs(x - o.pose.t[0]) <= hx and abs(y - o.pose.t[1]) <= hy:
                top = o.top_z()
                if top <= obj.pose.t[2] + 1e-9 and (support is None or top > support):
                    support = top
        if support is not None:
            t = obj.pose.t.copy()
            t[2] = support + obj.half_height()
            self._set_object_pose(oid, Pose(obj.pose.q, t))

    # -- observation ----------------------------------------------------------------

    def observe(self) -> SimObservation:
        attached = {oid: side for oid, (side, _) in self.attachments.items()}
        objs = tuple(replace(o, pose=Pose(o.pose.q.copy(), o.pose.t.copy()),
                             dims=o.dims.copy(), color=o.color.copy())
                     for o in self.objects)
        return SimObservation(self.tick, self.q_measured.copy(), objs, attached)

    def find_object(self, name: str) -> SceneObject:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)


def reset_scene(model: RobotModel, spec: SceneSpec, seed: int,
                q0: np.ndarray | None = None,
                grasp: GraspConfig | None = None) -> SimWorld:
    """Fresh world with the scene's randomized placements drawn from the seeded generator."""
    return SimWorld(model, spec, seed=seed, grasp=grasp, q0=q0)
