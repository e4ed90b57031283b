"""Forward kinematics, geometric Jacobians, and manipulability.

Poses come out in base coordinates; Jacobians are body-frame with row order
(angular; linear). Coupled joints are overridden (driven = ratio * driver)
before any kinematics, so perturbing a driven entry of q has no effect.

Tree walks are restricted to the ancestor chains of the requested frames and
per-joint rotation generators are precomputed, keeping single-frame FK cheap
enough for the 60 Hz control loop.
"""

from __future__ import annotations

import math

import numpy as np

from .model import BASE_LINK, FIXED, PRISMATIC, REVOLUTE, RobotModel
from .se3 import Pose, _cross3, quat_from_matrix

_EYE3 = np.eye(3)


class _Step:
    __slots__ = ("kind", "parent", "child", "r0", "p0", "r0_identity", "axis",
                 "qi", "k", "k2", "name")

    def __init__(self, joint, link_index, qi):
        self.kind = joint.kind
        self.parent = link_index[joint.parent]
        self.child = link_index[joint.child]
        self.r0 = joint.origin.rotation_matrix()
        self.p0 = np.asarray(joint.origin.t, dtype=float)
        self.r0_identity = bool(np.all(self.r0 == _EYE3))
        self.axis = np.asarray(joint.axis, dtype=float)
        self.qi = qi
        x, y, z = self.axis
        self.k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
        self.k2 = self.k @ self.k
        self.name = joint.name


class _KinCache:
    """Per-model arrays in topological order, built once per RobotModel."""

    def __init__(self, model: RobotModel):
        self.model = model
        self.link_index = {name: i for i, name in enumerate(model.links)}
        self.n_links = len(model.links)
        self.steps = [
            _Step(j, self.link_index, model.joint_index.get(j.name, -1))
            for j in model.topo_joints
        ]
        self.step_of_child = {s.child: i for i, s in enumerate(self.steps)}
        self.chain_q: dict[str, list[int]] = {}
        for link in model.links:
            self.chain_q[link] = [
                model.joint_index[j.name] for j in model.chain_to_link(link) if j.movable
            ]
        self.independent = tuple(
            n for n in model.movable_names
            if model.joint_index[n] not in model.driven_index
        )
        self.drives: dict[int, list[tuple[int, float]]] = {}
        for driven, (driver, ratio) in model.driven_index.items():
            self.drives.setdefault(driver, []).append((driven, ratio))
        self.kind_by_qi = {
            model.joint_index[j.name]: j.kind for j in model.joints if j.movable
        }
        # frame name -> (link idx, offset rotation or None if identity, offset translation)
        self.frame_info: dict[str, tuple[int, np.ndarray | None, np.ndarray]] = {}
        for f in model.frames.values():
            r0 = f.offset.rotation_matrix()
            self.frame_info[f.name] = (
                self.link_index[f.link],
                None if bool(np.all(r0 == _EYE3)) else r0,
                np.asarray(f.offset.t, dtype=float),
            )
        self._subwalk_memo: dict[frozenset, list[_Step]] = {}

    def steps_for_links(self, links: frozenset) -> list[_Step]:
        """Topo-ordered steps covering the ancestor closure of `links`."""
        memo = self._subwalk_memo.get(links)
        if memo is not None:
            return memo
        needed: set[int] = set()
        stack = [self.link_index[l] for l in links if l in self.link_index]
        while stack:
            li = stack.pop()
            si = self.step_of_child.get(li)
            if si is None or si in needed:
                continue
            needed.add(si)
            stack.append(self.steps[si].parent)
        ordered = [s for i, s in enumerate(self.steps) if i in needed]
        self._subwalk_memo[links] = ordered
        return ordered


def _cache(model: RobotModel) -> _KinCache:
    cache = getattr(model, "_kin_cache", None)
    if cache is None:
        cache = _KinCache(model)
        model._kin_cache = cache
    return cache


def effective_q(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Clamp to limits, then apply couplings."""
    return model.apply_couplings(model.clamp(np.asarray(q, dtype=float)))


def _walk(cache: _KinCache, steps: list[_Step], q_eff: np.ndarray, want_geom: bool):
    """Evaluate the given steps; returns link arrays and joint world geometry."""
    rs: list = [None] * cache.n_links
    ps: list = [None] * cache.n_links
    bi = cache.link_index[BASE_LINK]
    rs[bi] = _EYE3
    ps[bi] = np.zeros(3)
    geom: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for s in steps:
        rp = rs[s.parent]
        pp = ps[s.parent]
        rj = rp if s.r0_identity else rp @ s.r0
        pj = rp @ s.p0 + pp
        kind = s.kind
        if kind == REVOLUTE:
            v = q_eff[s.qi]
            rot = _EYE3 + math.sin(v) * s.k + (1.0 - math.cos(v)) * s.k2
            rs[s.child] = rj @ rot
            ps[s.child] = pj
        elif kind == PRISMATIC:
            rs[s.child] = rj
            ps[s.child] = pj + rj @ (s.axis * q_eff[s.qi])
        else:
            rs[s.child] = rj
            ps[s.child] = pj
        if want_geom and kind != FIXED:
            geom[s.qi] = (rj @ s.axis, pj)
    return rs, ps, geom


def _frame_world(model: RobotModel, cache: _KinCache, rs, ps, frame: str):
    info = cache.frame_info.get(frame)
    if info is None:
        model.frame(frame)  # raises UnknownFrame
    li, r0, p0 = info
    r = rs[li] if r0 is None else rs[li] @ r0
    p = rs[li] @ p0 + ps[li]
    return model.frames[frame], r, p


def _frame_links(model: RobotModel, frames) -> frozenset:
    return frozenset(model.frame(f).link for f in frames)


def forward_kinematics(model: RobotModel, q: np.ndarray, frame: str) -> Pose:
    """Pose of a named frame in base coordinates (q clamped, couplings applied)."""
    q_eff = effective_q(model, q)
    cache = _cache(model)
    steps = cache.steps_for_links(_frame_links(model, [frame]))
    rs, ps, _ = _walk(cache, steps, q_eff, False)
    _, r, p = _frame_world(model, cache, rs, ps, frame)
    return Pose(quat_from_matrix(r), p)


def frames_fk(model: RobotModel, q: np.ndarray, frames: list[str]) -> dict[str, Pose]:
    """FK for several frames with a single restricted tree walk."""
    q_eff = effective_q(model, q)
    cache = _cache(model)
    steps = cache.steps_for_links(_frame_links(model, frames))
    rs, ps, _ = _walk(cache, steps, q_eff, False)
    out = {}
    for name in frames:
        _, r, p = _frame_world(model, cache, rs, ps, name)
        out[name] = Pose(quat_from_matrix(r), p)
    return out


def frame_positions(model: RobotModel, q: np.ndarray, frames: list[str]) -> dict[str, np.ndarray]:
    """Frame origins only; skips rotation-to-quaternion work (hot loops)."""
    q_eff = effective_q(model, q)
    cache = _cache(model)
    steps = cache.steps_for_links(_frame_links(model, frames))
    rs, ps, _ = _walk(cache, steps, q_eff, False)
    out = {}
    for name in frames:
        info = cache.frame_info.get(name)
        if info is None:
            model.frame(name)  # raises UnknownFrame
        li, _r0, p0 = info
        out[name] = rs[li] @ p0 + ps[li]
    return out


def _geom_col6(cache, geom, chain, pf, qi) -> np.ndarray:
    col = np.zeros(6)
    if qi in chain:
        axis_w, point_w = geom[qi]
        if cache.kind_by_qi[qi] == REVOLUTE:
            col[:3] = axis_w
            col[3:] = _cross3(axis_w, pf - point_w)
        else:
            col[3:] = axis_w
    return col


def _assemble(cache, geom, chain, pf, cols):
    out = np.zeros((6, len(cols)))
    model = cache.model
    for k, name in enumerate(cols):
        qi = model.joint_index[name]
        col = _geom_col6(cache, geom, chain, pf, qi)
        for driven, ratio in cache.drives.get(qi, ()):
            col = col + ratio * _geom_col6(cache, geom, chain, pf, driven)
        out[:, k] = col
    return out


def jacobian(model: RobotModel, q: np.ndarray, frame: str,
             joints: tuple[str, ...] | None = None) -> np.ndarray:
    """Body-frame geometric Jacobian of `frame`, 6 x len(joints).

    Columns follow `joints` (default: all movable, non-driven joints in model
    order). Coupling chain rule applies: a driver's column includes the
    ratio-scaled contributions of its driven joints.
    """
    return fk_jacobian(model, q, frame, joints)[1]


def fk_jacobian(model: RobotModel, q: np.ndarray, frame: str,
                joints: tuple[str, ...] | None = None) -> tuple[Pose, np.ndarray]:
    """Frame pose and its body Jacobian from one tree walk."""
    q_eff = effective_q(model, q)
    cache = _cache(model)
    steps = cache.steps_for_links(_frame_links(model, [frame]))
    rs, ps, geom = _walk(cache, steps, q_eff, True)
    fdef, rf, pf = _frame_world(model, cache, rs, ps, frame)
    cols = joints if joints is not None else cache.independent
    chain = set(cache.chain_q[fdef.link])
    j = _assemble(cache, geom, chain, pf, cols)
    rft = rf.T
    j[:3, :] = rft @ j[:3, :]
    j[3:, :] = rft @ j[3:, :]
    return Pose(quat_from_matrix(rf), pf), j


def position_jacobians(model: RobotModel, q: np.ndarray, frames: list[str],
                       joints: tuple[str, ...],
                       in_frame: str | None = None):
    """Positions and position Jacobians of several frame origins, one walk.

    If `in_frame` is given, positions are relative to it and everything is
    rotated into its orientation (wrist-local fingertip derivatives).
    Returns (positions: dict name -> 3-vec, jacs: dict name -> 3 x len(joints)).
    """
    q_eff = effective_q(model, q)
    cache = _cache(model)
    want = list(frames) + ([in_frame] if in_frame else [])
    steps = cache.steps_for_links(_frame_links(model, want))
    rs, ps, geom = _walk(cache, steps, q_eff, True)

    rr = _EYE3
    pr = np.zeros(3)
    if in_frame is not None:
        _, rr, pr = _frame_world(model, cache, rs, ps, in_frame)
    rrt = rr.T

    out_col = {model.joint_index[n]: k for k, n in enumerate(joints)}
    driven_index = model.driven_index
    kind_by_qi = cache.kind_by_qi

    positions: dict[str, np.ndarray] = {}
    jacs: dict[str, np.ndarray] = {}
    for name in frames:
        fdef, _rf, pf = _frame_world(model, cache, rs, ps, name)
        jp = np.zeros((3, len(joints)))
        # walk only this frame's ancestor chain; coupled joints charge their driver
        for qi in cache.chain_q[fdef.link]:
            ratio = 1.0
            target = out_col.get(qi)
            if target is None:
                drv = driven_index.get(qi)
                if drv is None:
                    continue
                target = out_col.get(drv[0])
                if target is None:
                    continue
                ratio = drv[1]
            axis_w, point_w = geom[qi]
            if kind_by_qi[qi] == REVOLUTE:
                col = _cross3(axis_w, pf - point_w)
            else:
                col = axis_w
            jp[:, target] += ratio * col
        positions[name] = rrt @ (pf - pr)
        jacs[name] = rrt @ jp
    return positions, jacs


def manipulability(j: np.ndarray) -> float:
    """sqrt(det(J J^T)); tiny negative determinants from roundoff clamp to 0."""
    jjt = j @ j.T
    det = float(np.linalg.det(jjt))
    return math.sqrt(max(det, 0.0))
