"""Robot model: kinematic tree, named frames, couplings, and the text parser.

The model document is line-oriented UTF-8:

    robot <name>
    joint <name> <revolute|prismatic|fixed> parent=<link> child=<link> \
        xyz=<x,y,z> rpy=<r,p,y> axis=<x,y,z> limits=<lo,hi> [actuated]
    frame <name> link=<link> xyz=<x,y,z> rpy=<r,p,y>
    couple driven=<joint> driver=<joint> ratio=<f>
    action_layout <joint,...>
    # comment

xyz/rpy default to zero, axis to (0,0,1), limits to (-pi,pi) for revolute and
(-1,1) m for prismatic. The joint graph must be a tree rooted at the link
named "base". Couplings tie an unactuated joint to an actuated driver:
q_driven = ratio * q_driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadCoupling, CycleError, ParseError, UnknownFrame
from .se3 import Pose

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"

BASE_LINK = "base"


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str
    parent: str
    child: str
    origin: Pose
    axis: np.ndarray
    limits: tuple[float, float]
    actuated: bool

    @property
    def movable(self) -> bool:
        return self.kind != FIXED


@dataclass(frozen=True)
class FrameDef:
    name: str
    link: str
    offset: Pose


@dataclass(frozen=True)
class Coupling:
    driven: str
    driver: str
    ratio: float


@dataclass
class RobotModel:
    """Validated kinematic tree; immutable after parse."""

    name: str
    joints: tuple[Joint, ...]
    frames: dict[str, FrameDef]
    couplings: tuple[Coupling, ...]
    action_layout: tuple[str, ...]

    # derived, filled by _finalize
    movable_names: tuple[str, ...] = field(default_factory=tuple)
    joint_index: dict[str, int] = field(default_factory=dict)      # movable name -> q index
    topo_joints: tuple[Joint, ...] = field(default_factory=tuple)
    links: tuple[str, ...] = field(default_factory=tuple)
    lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    driven_index: dict[int, tuple[int, float]] = field(default_factory=dict)  # q idx -> (driver q idx, ratio)

    def _finalize(self) -> None:
        by_child: dict[str, Joint] = {}
        for j in self.joints:
            if j.child in by_child:
                raise CycleError(f"link '{j.child}' has two parent joints")
            if j.child == BASE_LINK:
                raise CycleError("the base link cannot be a joint child")
            by_child[j.child] = j

        links = {BASE_LINK} | {j.child for j in self.joints}
        for j in self.joints:
            if j.parent not in links:
                raise CycleError(f"joint '{j.name}' parent link '{j.parent}' does not exist")

        # topological order by walking child links up to base; detects cycles
        depth: dict[str, int] = {BASE_LINK: 0}

        def link_depth(link: str, trail: set[str]) -> int:
            if link in depth:
                return depth[link]
            if link in trail:
                raise CycleError(f"cycle through link '{link}'")
            trail.add(link)
            d = link_depth(by_child[link].parent, trail) + 1
            depth[link] = d
            return d

        for j in self.joints:
            link_depth(j.child, set())

        self.topo_joints = tuple(sorted(self.joints, key=lambda j: depth[j.child]))
        self.links = tuple(sorted(links))

        movable = [j for j in self.joints if j.movable]
        self.movable_names = tuple(j.name for j in movable)
        self.joint_index = {n: i for i, n in enumerate(self.movable_names)}
        self.lower = np.array([j.limits[0] for j in movable], dtype=float)
        self.upper = np.array([j.limits[1] for j in movable], dtype=float)

        for f in self.frames.values():
            if f.link not in links:
                raise UnknownFrame(f"frame '{f.name}' attached to missing link '{f.link}'")

        joint_by_name = {j.name: j for j in self.joints}
        actuated = {j.name for j in self.joints if j.actuated}
        for c in self.couplings:
            if c.driven not in joint_by_name or c.driver not in joint_by_name:
                raise BadCoupling(f"coupling {c.driven}<-{c.driver} names a missing joint")
            if c.driver not in actuated:
                raise BadCoupling(f"coupling driver '{c.driver}' is not actuated")
            if c.driven in actuated:
                raise BadCoupling(f"coupling driven joint '{c.driven}' must not be actuated")
            if not joint_by_name[c.driven].movable or not joint_by_name[c.driver].movable:
                raise BadCoupling(f"coupling {c.driven}<-{c.driver} involves a fixed joint")
        driven_names = [c.driven for c in self.couplings]
        if len(set(driven_names)) != len(driven_names):
            raise BadCoupling("a joint is driven by more than one coupling")
        self.driven_index = {
            self.joint_index[c.driven]: (self.joint_index[c.driver], c.ratio)
            for c in self.couplings
        }

        for n in self.action_layout:
            if n not in actuated:
                raise BadCoupling(f"action layout names non-actuated joint '{n}'")
        if len(set(self.action_layout)) != len(self.action_layout):
            raise BadCoupling("action layout repeats a joint")
        if set(self.action_layout) != actuated:
            missing = actuated - set(self.action_layout)
            raise BadCoupling(f"action layout does not cover actuated joints: {sorted(missing)}")

    # -- joint vectors --------------------------------------------------------

    @property
    def dof(self) -> int:
        return len(self.movable_names)

    @property
    def action_dim(self) -> int:
        return len(self.action_layout)

    def zero_q(self) -> np.ndarray:
        return np.clip(np.zeros(self.dof), self.lower, self.upper)

    def mid_q(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def in_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def apply_couplings(self, q: np.ndarray) -> np.ndarray:
        q = np.array(q, dtype=float, copy=True)
        for driven, (driver, ratio) in self.driven_index.items():
            q[driven] = ratio * q[driver]
        return q

    def command_to_q(self, command: np.ndarray, q_base: np.ndarray | None = None) -> np.ndarray:
        """Expand an action-layout command into a full joint vector."""
        if len(command) != self.action_dim:
            raise ValueError(f"command length {len(command)} != action dim {self.action_dim}")
        q = np.zeros(self.dof) if q_base is None else np.array(q_base, dtype=float, copy=True)
        for value, name in zip(command, self.action_layout):
            q[self.joint_index[name]] = value
        return self.apply_couplings(q)

    def q_to_command(self, q: np.ndarray) -> np.ndarray:
        return np.array([q[self.joint_index[n]] for n in self.action_layout], dtype=float)

    def command_limits(self) -> tuple[np.ndarray, np.ndarray]:
        idx = [self.joint_index[n] for n in self.action_layout]
        return self.lower[idx], self.upper[idx]

    # -- structure queries ----------------------------------------------------

    def joint(self, name: str) -> Joint:
        for j in self.joints:
            if j.name == name:
                return j
        raise UnknownFrame(f"no joint named '{name}'")

    def frame(self, name: str) -> FrameDef:
        try:
            return self.frames[name]
        except KeyError:
            raise UnknownFrame(f"no frame named '{name}'") from None

    def parent_joint_of_link(self, link: str) -> Joint | None:
        for j in self.joints:
            if j.child == link:
                return j
        if link == BASE_LINK:
            return None
        raise UnknownFrame(f"no link named '{link}'")

    def chain_to_link(self, link: str) -> list[Joint]:
        """Joints from base down to `link`, inclusive."""
        chain: list[Joint] = []
        j = self.parent_joint_of_link(link)
        while j is not None:
            chain.append(j)
            j = self.parent_joint_of_link(j.parent)
        chain.reverse()
        return chain

    def extract_subchain(self, root_link: str, name: str | None = None) -> "RobotModel":
        """Sub-model of everything at or below `root_link`, re-rooted at 'base'."""
        if root_link not in self.links:
            raise UnknownFrame(f"no link named '{root_link}'")
        keep_links = {root_link}
        changed = True
        while changed:
            changed = False
            for j in self.joints:
                if j.parent in keep_links and j.child not in keep_links:
                    keep_links.add(j.child)
                    changed = True

        def rename(link: str) -> str:
            return BASE_LINK if link == root_link else link

        joints = tuple(
            Joint(j.name, j.kind, rename(j.parent), rename(j.child), j.origin,
                  j.axis, j.limits, j.actuated)
            for j in self.joints if j.parent in keep_links and j.child in keep_links
        )
        joint_names = {j.name for j in joints}
        frames = {
            f.name: FrameDef(f.name, rename(f.link), f.offset)
            for f in self.frames.values()
            if f.link in keep_links
        }
        couplings = tuple(c for c in self.couplings
                          if c.driven in joint_names and c.driver in joint_names)
        layout = tuple(n for n in self.action_layout if n in joint_names)
        sub = RobotModel(name or f"{self.name}/{root_link}", joints, frames, couplings, layout)
        sub._finalize()
        return sub


# -- parser -------------------------------------------------------------------

def _parse_floats(token: str, n: int, lineno: int, what: str) -> np.ndarray:
    parts = token.split(",")
    if len(parts) != n:
        raise ParseError(lineno, f"{what} needs {n} comma-separated numbers, got '{token}'")
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError:
        raise ParseError(lineno, f"bad number in {what}: '{token}'") from None
    if not np.all(np.isfinite(vals)):
        raise ParseError(lineno, f"non-finite number in {what}")
    return vals


def _parse_kv(tokens: list[str], allowed: set[str], lineno: int) -> tuple[dict[str, str], list[str]]:
    kv: dict[str, str] = {}
    bare: list[str] = []
    for tok in tokens:
        if "=" in tok:
            key, _, value = tok.partition("=")
            if key not in allowed:
                raise ParseError(lineno, f"unknown field '{key}'")
            if key in kv:
                raise ParseError(lineno, f"duplicate field '{key}'")
            kv[key] = value
        else:
            bare.append(tok)
    return kv, bare


def parse_robot_model(text: str | bytes) -> RobotModel:
    """Parse and validate a model document; total over arbitrary input."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(0, f"not valid UTF-8: {e}") from None

    name: str | None = None
    joints: list[Joint] = []
    joint_names: set[str] = set()
    frames: dict[str, FrameDef] = {}
    couplings: list[Coupling] = []
    layout: tuple[str, ...] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]

        if head == "robot":
            if name is not None:
                raise ParseError(lineno, "duplicate robot line")
            if len(tokens) != 2:
                raise ParseError(lineno, "robot line needs exactly one name")
            name = tokens[1]

        elif head == "joint":
            if len(tokens) < 3:
                raise ParseError(lineno, "joint needs a name and a type")
            jname, kind = tokens[1], tokens[2]
            if kind not in (REVOLUTE, PRISMATIC, FIXED):
                raise ParseError(lineno, f"unknown joint type '{kind}'")
            if jname in joint_names:
                raise ParseError(lineno, f"duplicate joint '{jname}'")
            kv, bare = _parse_kv(tokens[3:], {"parent", "child", "xyz", "rpy", "axis", "limits"}, lineno)
            actuated = False
            for b in bare:
                if b == "actuated":
                    actuated = True
                else:
                    raise ParseError(lineno, f"unexpected token '{b}'")
            if "parent" not in kv or "child" not in kv:
                raise ParseError(lineno, "joint needs parent= and child=")
            xyz = _parse_floats(kv["xyz"], 3, lineno, "xyz") if "xyz" in kv else np.zeros(3)
            rpy = _parse_floats(kv["rpy"], 3, lineno, "rpy") if "rpy" in kv else np.zeros(3)
            axis = _parse_floats(kv["axis"], 3, lineno, "axis") if "axis" in kv else np.array([0.0, 0.0, 1.0])
            if kind != FIXED:
                norm = float(np.linalg.norm(axis))
                if norm < 1e-12:
                    raise ParseError(lineno, "zero joint axis")
                axis = axis / norm
            if "limits" in kv:
                lims = _parse_floats(kv["limits"], 2, lineno, "limits")
                if lims[0] > lims[1]:
                    raise ParseError(lineno, f"limits lo > hi: {kv['limits']}")
                limits = (float(lims[0]), float(lims[1]))
            else:
                limits = (-math.pi, math.pi) if kind == REVOLUTE else (-1.0, 1.0)
            if actuated and kind == FIXED:
                raise ParseError(lineno, "a fixed joint cannot be actuated")
            joints.append(Joint(jname, kind, kv["parent"], kv["child"],
                                Pose.from_rpy_xyz(rpy, xyz), axis, limits, actuated))
            joint_names.add(jname)

        elif head == "frame":
            if len(tokens) < 2:
                raise ParseError(lineno, "frame needs a name")
            fname = tokens[1]
            if fname in frames:
                raise ParseError(lineno, f"duplicate frame '{fname}'")
            kv, bare = _parse_kv(tokens[2:], {"link", "xyz", "rpy"}, lineno)
            if bare:
                raise ParseError(lineno, f"unexpected token '{bare[0]}'")
            if "link" not in kv:
                raise ParseError(lineno, "frame needs link=")
            xyz = _parse_floats(kv["xyz"], 3, lineno, "xyz") if "xyz" in kv else np.zeros(3)
            rpy = _parse_floats(kv["rpy"], 3, lineno, "rpy") if "rpy" in kv else np.zeros(3)
            frames[fname] = FrameDef(fname, kv["link"], Pose.from_rpy_xyz(rpy, xyz))

        elif head == "couple":
            kv, bare = _parse_kv(tokens[1:], {"driven", "driver", "ratio"}, lineno)
            if bare:
                raise ParseError(lineno, f"unexpected token '{bare[0]}'")
            if "driven" not in kv or "driver" not in kv:
                raise ParseError(lineno, "couple needs driven= and driver=")
            ratio = 1.0
            if "ratio" in kv:
                ratio = float(_parse_floats(kv["ratio"], 1, lineno, "ratio")[0])
            couplings.append(Coupling(kv["driven"], kv["driver"], ratio))

        elif head == "action_layout":
            if layout is not None:
                raise ParseError(lineno, "duplicate action_layout line")
            rest = "".join(tokens[1:])
            names = [n for n in rest.split(",") if n]
            if not names:
                raise ParseError(lineno, "empty action_layout")
            layout = tuple(names)

        else:
            raise ParseError(lineno, f"unknown directive '{head}'")

    if name is None:
        raise ParseError(0, "missing robot line")
    if not joints:
        raise ParseError(0, "model has no joints")
    for n in (layout or ()):
        if n not in joint_names:
            raise ParseError(0, f"action layout names unknown joint '{n}'")

    model = RobotModel(name, tuple(joints), frames, tuple(couplings),
                       layout or tuple(j.name for j in joints if j.actuated))
    model._finalize()
    return model


def load_robot_model(path) -> RobotModel:
    with open(path, "rb") as f:
        return parse_robot_model(f.read())
