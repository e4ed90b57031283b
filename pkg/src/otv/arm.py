"""Arm control: operator-to-robot mapping, SE(3) filtering, and closed-loop IK.

Pipeline per tick: calibrate once, then map head/wrist poses into neck targets
and end-effector targets, low-pass the targets on the SE(3) geodesic, and run
a few damped-least-squares iterations with a manipulability-guarded nullspace
correction toward a reference posture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AngleNearPi, MissingComponent, NumericalFailure
from .kinematics import fk_jacobian, manipulability
from .model import RobotModel
from .opframe import OperatorFrame
from .se3 import (
    Pose,
    Twist,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    quat_to_zyx,
    se3_compose,
    se3_interpolate,
    se3_inverse,
    se3_log,
)
from .se3 import _log_v_inverse  # cut-locus-safe error twist needs V^-1 directly

_Z = np.array([0.0, 0.0, 1.0])

ARM_JOINT_SUFFIXES = ("shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow",
                      "wrist_roll", "wrist_pitch", "wrist_yaw")


@dataclass(frozen=True)
class ArmChain:
    """One arm's joint names and end-effector frame on the full model."""

    side: str
    joints: tuple[str, ...]
    ee_frame: str
    q_indices: tuple[int, ...]


def arm_chain(model: RobotModel, side: str, frame: str | None = None) -> ArmChain:
    prefix = "l" if side == "left" else "r"
    joints = tuple(f"{prefix}_{s}" for s in ARM_JOINT_SUFFIXES)
    for j in joints:
        if j not in model.joint_index:
            raise KeyError(f"model '{model.name}' lacks arm joint '{j}'")
    return ArmChain(side, joints, frame or f"{prefix}_ee",
                    tuple(model.joint_index[j] for j in joints))


def neck_joints(model: RobotModel) -> tuple[tuple[str, str], ...]:
    """Neck (joint name, axis kind) pairs base-outward; kind in yaw/pitch/roll."""
    head_link = model.frame("head").link
    out = []
    for j in model.chain_to_link(head_link):
        if not j.movable:
            continue
        ax = np.abs(j.axis)
        kind = ("roll", "pitch", "yaw")[int(np.argmax(ax))]
        out.append((j.name, kind))
    return tuple(out)


@dataclass(frozen=True)
class EndEffectorTarget:
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion, robot base frame
    side: str
    clamped: bool = False
    frame: str | None = None  # chain frame to drive; default: the side's ee frame

    def pose(self) -> Pose:
        return Pose(self.orientation, self.position)


@dataclass(frozen=True)
class CalibrationState:
    """Operator head pose at calibration plus the yaw alignment into robot base."""

    head0: Pose
    align_q: np.ndarray
    align_r: np.ndarray


@dataclass
class MappingConfig:
    """Reachable box the mapped wrist targets are clamped into (base frame)."""

    reach_lo: np.ndarray = field(default_factory=lambda: np.array([-0.10, -0.80, -0.60]))
    reach_hi: np.ndarray = field(default_factory=lambda: np.array([0.70, 0.80, 0.60]))


@dataclass
class IkConfig:
    damping: float = 1e-2          # DLS mu
    step_clamp: float = 0.2        # per-iteration inf-norm clamp, rad
    gain: float = 1.0              # error gain K
    max_iters: int = 3             # iterations per tick
    pos_tol: float = 1e-4          # m
    rot_tol: float = 1e-3          # rad
    w_min: float = 1e-3            # manipulability threshold
    k_n: float = 0.1               # nullspace gain
    rot_weight: float = 1.0        # angular error rows scale (<1: position priority)
    restarts: bool = True          # seeded exploration on stall (offline mode)
    q_ref: np.ndarray | None = None  # reference posture (full q); mid-range if None

    def with_offline_iters(self, iters: int = 300) -> "IkConfig":
        return replace(self, max_iters=iters)


_HOME_VALUES = {
    "l_shoulder_pitch": -0.3, "r_shoulder_pitch": -0.3,
    "l_shoulder_roll": 0.25, "r_shoulder_roll": -0.25,
    "l_elbow": -1.2, "r_elbow": -1.2,
}


def home_posture(model: RobotModel) -> np.ndarray:
    """Ready posture: elbows bent, arms slightly raised, away from singularities."""
    q = model.zero_q()
    for name, value in _HOME_VALUES.items():
        idx = model.joint_index.get(name)
        if idx is not None:
            q[idx] = value
    return model.apply_couplings(model.clamp(q))


def calibrate(frame: OperatorFrame) -> CalibrationState:
    """Fix the operator world: gravity axes assumed shared (Z up), yaw matched."""
    if not frame.complete:
        raise MissingComponent("calibration needs head, both wrists, and both hands")
    fwd = quat_rotate(frame.head.q, np.array([1.0, 0.0, 0.0]))
    yaw = math.atan2(fwd[1], fwd[0])
    align_q = quat_from_axis_angle(_Z, -yaw)
    return CalibrationState(frame.head, align_q, quat_to_matrix(align_q))


def map_operator_to_targets(
    frame: OperatorFrame,
    cal: CalibrationState,
    head_pose_robot: Pose,
    mapping: MappingConfig | None = None,
) -> tuple[EndEffectorTarget | None, EndEffectorTarget | None]:
    """Head-relative positions, calibration-frame absolute orientations.

    target position = robot head position + A (p_wrist - p_head_operator);
    target orientation = A * operator wrist orientation. Positions outside the
    reachable box clamp onto it with the target flagged.
    """
    if frame.head is None:
        raise MissingComponent("mapping needs a head pose")
    mapping = mapping or MappingConfig()
    out: list[EndEffectorTarget | None] = []
    for side in ("left", "right"):
        wrist = frame.wrist(side)
        if wrist is None:
            out.append(None)
            continue
        rel = cal.align_r @ (wrist.t - frame.head.t)
        pos = head_pose_robot.t + rel
        clipped = np.clip(pos, mapping.reach_lo, mapping.reach_hi)
        clamped = bool(np.any(clipped != pos))
        quat = quat_normalize(quat_mul(cal.align_q, wrist.q))
        out.append(EndEffectorTarget(clipped, quat, side, clamped))
    return out[0], out[1]


def map_head(head: Pose, cal: CalibrationState, model: RobotModel) -> np.ndarray:
    """Neck joint targets from the head orientation relative to calibration.

    Intrinsic Z-Y-X (yaw-pitch-roll) extraction; joints matched by axis kind
    and clamped to their limits.
    """
    r_rel = cal.align_r @ quat_to_matrix(head.q) @ quat_to_matrix(cal.head0.q).T @ cal.align_r.T
    yaw, pitch, roll = quat_to_zyx(quat_from_matrix(r_rel))
    by_kind = {"yaw": yaw, "pitch": pitch, "roll": roll}
    spec = neck_joints(model)
    q = np.zeros(len(spec))
    for i, (name, kind) in enumerate(spec):
        j = model.joint_index[name]
        q[i] = min(max(by_kind[kind], model.lower[j]), model.upper[j])
    return q


@dataclass
class FilterState:
    """SE(3) low-pass state; lam = 1 passes targets through unfiltered."""

    lam: float = 0.6
    last: Pose | None = None


def filter_pose(state: FilterState, target: Pose) -> Pose:
    if state.last is None:
        state.last = target
        return target
    out = se3_interpolate(state.last, target, state.lam)
    state.last = out
    return out


def _pose_error(current: Pose, target: Pose) -> tuple[np.ndarray, float, float]:
    """Body-frame error twist and (pos, rot) error magnitudes.

    At the rotation cut locus the log is not unique; the twist is built from
    the quaternion's own (well-defined) axis there so CLIK never stalls.
    """
    rel = se3_compose(se3_inverse(current), target)
    try:
        tw = se3_log(rel)
    except AngleNearPi:
        xyz = rel.q[1:]
        s = float(np.linalg.norm(xyz))
        w = xyz * (2.0 * math.atan2(s, float(rel.q[0])) / s)
        tw = Twist(w, _log_v_inverse(w) @ rel.t)
    e = tw.as_vector()
    pos_err = float(np.linalg.norm(rel.t))
    rot_err = float(np.linalg.norm(tw.angular))
    return e, pos_err, rot_err


def _dls_delta(j: np.ndarray, e: np.ndarray, cfg: IkConfig) -> np.ndarray:
    a = j @ j.T + (cfg.damping ** 2) * np.eye(6)
    if np.linalg.cond(a) > 1e12:
        raise NumericalFailure("ill-conditioned damped system")
    dq = j.T @ np.linalg.solve(a, cfg.gain * e)
    peak = float(np.abs(dq).max()) if dq.size else 0.0
    if peak > cfg.step_clamp:
        dq *= cfg.step_clamp / peak
    return dq


def _limits_aware_delta(j: np.ndarray, e: np.ndarray, q: np.ndarray,
                        lo: np.ndarray, hi: np.ndarray, cfg: IkConfig,
                        rounds: int = 3) -> np.ndarray:
    """DLS step that freezes joints pinned at a limit and pushing outward.

    Re-solving on the free columns keeps the step direction useful instead of
    letting the limit clip distort it.
    """
    n = j.shape[1]
    free = np.ones(n, dtype=bool)
    tol = 1e-9
    for _ in range(rounds):
        dq = np.zeros(n)
        dq[free] = _dls_delta(j[:, free], e, cfg)
        viol = (((q <= lo + tol) & (dq < 0)) | ((q >= hi - tol) & (dq > 0))) & free
        if not viol.any():
            return dq
        free &= ~viol
        if not free.any():
            return np.zeros(n)
    dq = np.zeros(n)
    dq[free] = _dls_delta(j[:, free], e, cfg)
    viol = ((q <= lo + tol) & (dq < 0)) | ((q >= hi - tol) & (dq > 0))
    dq[viol] = 0.0
    return dq


def clik_step(model: RobotModel, q: np.ndarray, target: EndEffectorTarget,
              cfg: IkConfig) -> np.ndarray:
    """One damped-least-squares step toward the target; full-size delta vector."""
    chain = arm_chain(model, target.side, target.frame)
    pose, j = fk_jacobian(model, q, chain.ee_frame, chain.joints)
    e, _, _ = _pose_error(pose, target.pose())
    e[:3] *= cfg.rot_weight
    dq = _dls_delta(j, e, cfg)
    out = np.zeros(model.dof)
    out[list(chain.q_indices)] = dq
    return out


def nullspace_correction(model: RobotModel, q: np.ndarray, q_ref: np.ndarray,
                         j: np.ndarray, cfg: IkConfig,
                         joints: tuple[str, ...]) -> np.ndarray:
    """Posture correction projected onto the exact nullspace of J.

    Zero when manipulability is healthy (>= w_min). The projector uses the
    SVD nullspace basis, so the emitted delta moves the end-effector by at
    most ~1e-8 * |delta| even near singularities.
    """
    out = np.zeros(model.dof)
    if manipulability(j) >= cfg.w_min:
        return out
    idx = [model.joint_index[n] for n in joints]
    _, s, vt = np.linalg.svd(j, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > max(smax * 1e-8, 1e-300)))
    if rank >= len(joints):
        return out
    n = vt[rank:].T  # columns span null(J)
    u = cfg.k_n * (q_ref[idx] - q[idx])
    out[idx] = n @ (n.T @ u)
    return out


@dataclass(frozen=True)
class ArmSolveResult:
    q: np.ndarray
    converged: bool
    iterations: int
    pos_err: float
    rot_err: float


# offline (many-iteration) escape strategy: runs that stall or overstay their
# per-run budget restart from a seeded uniform sample of the arm's joint box,
# staying fully deterministic; per-tick budgets (a few iterations) never
# reach either threshold, so online behavior is plain CLIK
_STALL_WINDOW = 15
_STALL_EPS = 1e-6
_RUN_CAP = 70


def solve_arm(model: RobotModel, q0: np.ndarray, target: EndEffectorTarget,
              cfg: IkConfig) -> ArmSolveResult:
    """Iterate limits-aware CLIK + nullspace correction; returns the best q visited."""
    chain = arm_chain(model, target.side, target.frame)
    idx = list(chain.q_indices)
    q_ref = cfg.q_ref if cfg.q_ref is not None else model.mid_q()
    target_pose = target.pose()
    lo, hi = model.lower[idx], model.upper[idx]

    q0 = model.clamp(np.asarray(q0, dtype=float).copy())
    q = q0.copy()
    best_q = q.copy()
    best_err = math.inf
    best_pos = best_rot = math.inf
    run_best = math.inf
    iterations = 0
    converged = False
    since_improve = 0
    run_iters = 0
    restarts = 0
    for it in range(cfg.max_iters + 1):
        pose, j = fk_jacobian(model, q, chain.ee_frame, chain.joints)
        e, pos_err, rot_err = _pose_error(pose, target_pose)
        e[:3] *= cfg.rot_weight
        score = pos_err + cfg.rot_weight * rot_err
        if score < run_best - _STALL_EPS:
            since_improve = 0
            run_best = score
        else:
            since_improve += 1
        if score < best_err:
            best_err = score
            best_q = q.copy()
            best_pos, best_rot = pos_err, rot_err
        if pos_err < cfg.pos_tol and rot_err < cfg.rot_tol:
            converged = True
            iterations = it
            break
        if it == cfg.max_iters:
            iterations = it
            break
        if cfg.restarts and (since_improve >= _STALL_WINDOW or run_iters >= _RUN_CAP):
            restarts += 1
            rng = np.random.default_rng(1_000_003 + restarts)
            q = q0.copy()
            q[idx] = rng.uniform(lo, hi)
            since_improve = 0
            run_iters = 0
            run_best = math.inf
            continue
        dq = _limits_aware_delta(j, e, q[idx], lo, hi, cfg)
        if manipulability(j) < cfg.w_min:
            corr = nullspace_correction(model, q, q_ref, j, cfg, chain.joints)
            dq = dq + corr[idx]
        q[idx] += dq
        q = model.clamp(q)
        run_iters += 1
    return ArmSolveResult(best_q, converged, iterations, best_pos, best_rot)
