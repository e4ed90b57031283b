"""Scene specification: JSON-described objects plus a seeded placement grid.

Schema:
    {"objects": [{"shape": "box"|"cylinder", "dims": [...], "pose": {"xyz": [...],
                  "rpy": [...]}, "color": [r,g,b,a], "graspable": bool,
                  "name": str, "placement": "fixed"|"grid"}],
     "grid": {"rows": int, "cols": int, "pitch_m": float, "origin": [x,y,z]}}

Objects with placement "grid" get their x/y drawn from distinct lattice cells
by the seeded generator at reset; z comes from their pose. `name` is an
optional label other systems (the scripted producer, tests) can look up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadSpec
from .se3 import Pose


@dataclass
class SceneObject:
    id: int
    shape: str
    dims: np.ndarray       # box: (lx, ly, lz); cylinder: (radius, height)
    pose: Pose
    color: np.ndarray      # RGBA, uint8
    graspable: bool
    name: str = ""

    def half_height(self) -> float:
        return float(self.dims[1] / 2 if self.shape == "cylinder" else self.dims[2] / 2)

    def top_z(self) -> float:
        return float(self.pose.t[2]) + self.half_height()

    def xy_extent(self) -> tuple[float, float]:
        if self.shape == "cylinder":
            return float(self.dims[0]), float(self.dims[0])
        return float(self.dims[0] / 2), float(self.dims[1] / 2)


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    pitch_m: float
    origin: np.ndarray

    def cell_xy(self, r: int, c: int) -> np.ndarray:
        return self.origin[:2] + np.array([r * self.pitch_m, c * self.pitch_m])


@dataclass
class SceneSpec:
    objects: list[SceneObject]
    grid: GridSpec | None
    grid_placed: list[int] = field(default_factory=list)  # indices into objects


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise BadSpec(msg)


def parse_scene(text: str | bytes) -> SceneSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise BadSpec(f"not valid JSON: {e}") from None
    _require(isinstance(doc, dict), "top level must be an object")
    raw_objects = doc.get("objects", [])
    _require(isinstance(raw_objects, list), "'objects' must be a list")

    objects: list[SceneObject] = []
    grid_placed: list[int] = []
    for i, o in enumerate(raw_objects):
        _require(isinstance(o, dict), f"object {i} must be an object")
        shape = o.get("shape")
        _require(shape in ("box", "cylinder"), f"object {i}: bad shape {shape!r}")
        dims = np.asarray(o.get("dims", []), dtype=float)
        want = 2 if shape == "cylinder" else 3
        _require(dims.shape == (want,), f"object {i}: dims needs {want} numbers")
        _require(bool(np.all(dims > 0)), f"object {i}: dims must be positive")
        pose_doc = o.get("pose", {})
        xyz = np.asarray(pose_doc.get("xyz", [0, 0, 0]), dtype=float)
        rpy = np.asarray(pose_doc.get("rpy", [0, 0, 0]), dtype=float)
        _require(xyz.shape == (3,) and rpy.shape == (3,), f"object {i}: bad pose")
        color = np.asarray(o.get("color", [200, 200, 200, 255]), dtype=float)
        _require(color.shape == (4,), f"object {i}: color needs 4 numbers")
        placement = o.get("placement", "fixed")
        _require(placement in ("fixed", "grid"), f"object {i}: bad placement")
        objects.append(SceneObject(
            id=i, shape=shape, dims=dims, pose=Pose.from_rpy_xyz(rpy, xyz),
            color=np.clip(color, 0, 255).astype(np.uint8),
            graspable=bool(o.get("graspable", False)),
            name=str(o.get("name", "")),
        ))
        if placement == "grid":
            grid_placed.append(i)

    grid = None
    if "grid" in doc and doc["grid"] is not None:
        g = doc["grid"]
        _require(isinstance(g, dict), "'grid' must be an object")
        try:
            grid = GridSpec(int(g["rows"]), int(g["cols"]), float(g["pitch_m"]),
                            np.asarray(g["origin"], dtype=float))
        except (KeyError, TypeError, ValueError) as e:
            raise BadSpec(f"bad grid spec: {e}") from None
        _require(grid.rows > 0 and grid.cols > 0 and grid.pitch_m > 0, "bad grid numbers")
        _require(grid.origin.shape == (3,), "grid origin needs 3 numbers")
    if grid_placed:
        _require(grid is not None, "grid-placed objects but no grid")
        _require(len(grid_placed) <= grid.rows * grid.cols,
                 "more grid-placed objects than cells")
    return SceneSpec(objects, grid, grid_placed)


def load_scene(path) -> SceneSpec:
    with open(path, "rb") as f:
        return parse_scene(f.read())


def place_objects(spec: SceneSpec, seed: int) -> list[SceneObject]:
    """Objects with grid placements resolved via the seeded generator."""
    out = [replace(o, pose=Pose(o.pose.q.copy(), o.pose.t.copy()),
                   dims=o.dims.copy(), color=o.color.copy())
           for o in spec.objects]
    if spec.grid_placed:
        rng = np.random.default_rng(seed)
        g = spec.grid
        cells = rng.choice(g.rows * g.cols, size=len(spec.grid_placed), replace=False)
        for idx, cell in zip(spec.grid_placed, cells):
            r, c = divmod(int(cell), g.cols)
            o = out[idx]
            xy = g.cell_xy(r, c)
            out[idx] = replace(o, pose=Pose(o.pose.q, np.array([xy[0], xy[1], o.pose.t[2]])))
    return out
