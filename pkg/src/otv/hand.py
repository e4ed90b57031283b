"""Hand retargeting: match scaled human keypoint vectors with robot hand FK.

Per tick this solves

    min_q  sum_i ||alpha v_i - f_i(q)||^2 + beta ||q - q_prev||^2

over the hand chain's actuated joints, where v_i are wrist-local human
keypoint vectors and f_i(q) the corresponding robot frame-pair vectors. The
solver is a projected Levenberg-Marquardt on the stacked residual
[targets - f(q); sqrt(beta) (q - q_prev)], warm-started at q_prev, with joint
limits enforced by projection; it never returns a worse point than q_prev.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingKeypoint
from .kinematics import frame_positions, frames_fk, position_jacobians
from .model import RobotModel
from .opframe import KEYPOINT_NAMES, HandKeypoints
from .se3 import Pose, quat_to_matrix

DEXTEROUS_HUMAN_PAIRS = (
    ("wrist", "thumb_tip"),
    ("wrist", "index_tip"),
    ("wrist", "middle_tip"),
    ("wrist", "ring_tip"),
    ("wrist", "pinky_tip"),
    ("thumb_tip", "index_tip"),
    ("thumb_tip", "middle_tip"),
)


@dataclass(frozen=True)
class VectorPair:
    human: tuple[str, str]  # keypoint names (from, to)
    robot: tuple[str, str]  # hand-chain frame names (from, to)


@dataclass(frozen=True)
class VectorSpec:
    pairs: tuple[VectorPair, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    @staticmethod
    def dexterous(prefix: str) -> "VectorSpec":
        """Seven-vector spec: wrist->5 fingertips plus thumb->index/middle."""
        def robot_frame(keypoint: str) -> str:
            return f"{prefix}_{'wrist' if keypoint == 'wrist' else keypoint}"

        return VectorSpec(tuple(
            VectorPair((a, b), (robot_frame(a), robot_frame(b)))
            for a, b in DEXTEROUS_HUMAN_PAIRS
        ))

    @staticmethod
    def gripper(prefix: str) -> "VectorSpec":
        """Single pinch vector: thumb->index mapped onto the jaw separation."""
        return VectorSpec((
            VectorPair(("thumb_tip", "index_tip"),
                       (f"{prefix}_gripper_upper", f"{prefix}_gripper_lower")),
        ))

    def validate(self, chain: RobotModel) -> None:
        for p in self.pairs:
            for kp in p.human:
                if kp not in KEYPOINT_NAMES:
                    raise MissingKeypoint(f"unknown keypoint '{kp}'")
            for fr in p.robot:
                chain.frame(fr)

    def robot_frames(self) -> tuple[str, ...]:
        names: list[str] = []
        for p in self.pairs:
            for fr in p.robot:
                if fr not in names:
                    names.append(fr)
        return tuple(names)


@dataclass
class RetargetingConfig:
    alpha: float = 1.1         # human-to-robot hand scale
    beta: float = 0.1          # temporal smoothness weight
    max_iters: int = 16
    step_tol: float = 1e-6
    lm_damping_init: float = 1e-3


@dataclass
class RetargetingProblem:
    """One tick's retargeting instance over a hand chain's actuated joints."""

    chain: RobotModel
    spec: VectorSpec
    targets: np.ndarray        # (N, 3) wrist-local, already alpha-scaled
    q_prev: np.ndarray         # actuated joint values, previous tick
    joints: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.joints = tuple(j.name for j in self.chain.joints if j.actuated)
        if len(self.q_prev) != len(self.joints):
            raise ValueError(
                f"q_prev has {len(self.q_prev)} values for {len(self.joints)} actuated joints")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("retargeting targets must be finite")

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        idx = [self.chain.joint_index[n] for n in self.joints]
        return self.chain.lower[idx], self.chain.upper[idx]

    def full_q(self, q_act: np.ndarray) -> np.ndarray:
        q = self.chain.zero_q()
        for v, n in zip(q_act, self.joints):
            q[self.chain.joint_index[n]] = v
        return q


def compute_human_vectors(hand: HandKeypoints, wrist: Pose, spec: VectorSpec,
                          alpha: float) -> np.ndarray:
    """alpha * R_wrist^T (p_to - p_from): scaled, wrist-local target vectors."""
    rt = quat_to_matrix(wrist.q).T
    out = np.zeros((len(spec), 3))
    for i, pair in enumerate(spec.pairs):
        try:
            a = hand.point(pair.human[0])
            b = hand.point(pair.human[1])
        except KeyError as e:
            raise MissingKeypoint(str(e)) from None
        out[i] = alpha * (rt @ (b - a))
    return out


def _robot_vectors(prob: RetargetingProblem, q_act: np.ndarray) -> np.ndarray:
    """f_i(q): frame-pair vectors in the hand chain's base (wrist) frame."""
    poses = frames_fk(prob.chain, prob.full_q(q_act), list(prob.spec.robot_frames()))
    out = np.zeros((len(prob.spec), 3))
    for i, pair in enumerate(prob.spec.pairs):
        out[i] = poses[pair.robot[1]].t - poses[pair.robot[0]].t
    return out


def objective(q_act: np.ndarray, prob: RetargetingProblem, cfg: RetargetingConfig) -> float:
    """Exact value of the vector-matching objective at q_act."""
    d = prob.targets - _robot_vectors(prob, q_act)
    smooth = q_act - prob.q_prev
    return float(np.sum(d * d) + cfg.beta * np.sum(smooth * smooth))


def _residual_and_jacobian(prob: RetargetingProblem, q_act: np.ndarray,
                           cfg: RetargetingConfig, with_jacobian: bool):
    n = len(prob.joints)
    big_n = len(prob.spec)
    sqrt_beta = float(np.sqrt(cfg.beta))
    r = np.zeros(3 * big_n + n)
    names = list(prob.spec.robot_frames())
    if with_jacobian:
        positions, jacs = position_jacobians(prob.chain, prob.full_q(q_act),
                                             names, prob.joints)
    else:
        # cost-only evaluations (LM step trials) skip the Jacobian work
        positions = frame_positions(prob.chain, prob.full_q(q_act), names)
        jacs = None
    jr = np.zeros((3 * big_n + n, n)) if with_jacobian else None
    for i, pair in enumerate(prob.spec.pairs):
        vec = positions[pair.robot[1]] - positions[pair.robot[0]]
        r[3 * i: 3 * i + 3] = prob.targets[i] - vec
        if with_jacobian:
            jr[3 * i: 3 * i + 3, :] = -(jacs[pair.robot[1]] - jacs[pair.robot[0]])
    r[3 * big_n:] = sqrt_beta * (q_act - prob.q_prev)
    if with_jacobian:
        jr[3 * big_n:, :] = sqrt_beta * np.eye(n)
    return r, jr


@dataclass(frozen=True)
class RetargetResult:
    q: np.ndarray
    ok: bool
    iterations: int
    residual_norm: float


def retarget_step(prob: RetargetingProblem, cfg: RetargetingConfig) -> RetargetResult:
    """Projected LM minimization, warm-started at q_prev; monotone in objective."""
    lo, hi = prob.limits()
    q = np.clip(np.asarray(prob.q_prev, dtype=float).copy(), lo, hi)
    r, jr = _residual_and_jacobian(prob, q, cfg, True)
    cost = float(r @ r)
    lam = cfg.lm_damping_init
    n = len(q)
    iterations = 0
    for it in range(cfg.max_iters):
        iterations = it + 1
        jtj = jr.T @ jr
        jtr = jr.T @ r
        stepped = False
        done = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(n), -jtr)
            except np.linalg.LinAlgError:
                return RetargetResult(prob.q_prev.copy(), False, iterations, float(np.sqrt(cost)))
            if float(np.abs(delta).max()) < cfg.step_tol:
                # sub-tolerance step: stationary; do not apply, keeps constant
                # inputs at an exact fixed point
                done = True
                break
            q_new = np.clip(q + delta, lo, hi)
            r_new, _ = _residual_and_jacobian(prob, q_new, cfg, False)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                q = q_new
                cost = cost_new
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 4.0
        if done or not stepped:
            break
        r, jr = _residual_and_jacobian(prob, q, cfg, True)
    return RetargetResult(q, True, iterations, float(np.sqrt(cost)))


def retarget_sequence(chain: RobotModel, spec: VectorSpec,
                      hands, wrists, cfg: RetargetingConfig,
                      q0: np.ndarray) -> list[np.ndarray]:
    """Fold retarget_step over a stream, threading q_prev.

    Entries with a missing/invalid hand hold the last commanded joints.
    """
    q_prev = np.asarray(q0, dtype=float).copy()
    out: list[np.ndarray] = []
    for hand, wrist in zip(hands, wrists):
        if hand is None or wrist is None or not hand.is_sane():
            out.append(q_prev.copy())
            continue
        targets = compute_human_vectors(hand, wrist, spec, cfg.alpha)
        res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
        q_prev = res.q
        out.append(q_prev.copy())
    return out
