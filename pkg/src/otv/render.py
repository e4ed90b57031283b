"""Software stereo renderer: z-buffered flat-shaded triangles, pinhole eyes.

Two cameras ride the mounted head frame, offset half a baseline along its
lateral axis, looking along head +X. Everything is float64 numpy with a fixed
traversal order, so frames are bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import _walk, frames_fk
from .model import RobotModel
from .se3 import quat_to_matrix

BACKGROUND = np.array([24, 28, 34], dtype=np.uint8)
ROBOT_COLOR = np.array([165, 168, 178], dtype=np.float64)
_LIGHT = np.array([0.35, 0.25, 0.9])
_LIGHT = _LIGHT / np.linalg.norm(_LIGHT)

# camera axes in head coordinates: x_cam = -y_head, y_cam = -z_head, z_cam = +x_head
_R_HEAD_CAM = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


@dataclass
class CameraRig:
    mount_frame: str = "head"
    baseline: float = 0.063
    width: int = 128
    height: int = 96
    focal_px: float | None = None   # default: 60 degree horizontal FOV
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if self.baseline <= 0:
            raise ValueError("baseline must be positive")
        if self.width < 16 or self.height < 16:
            raise ValueError("resolution must be at least 16x16")
        if self.focal_px is None:
            self.focal_px = 0.5 * self.width / math.tan(math.radians(30.0))
        if self.cx is None:
            self.cx = self.width / 2.0
        if self.cy is None:
            self.cy = self.height / 2.0


@dataclass(frozen=True)
class StereoImage:
    left: np.ndarray   # (h, w, 3) uint8
    right: np.ndarray


_UNIT_BOX_VERTS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float) * 0.5

_BOX_TRIS = np.array([
    [0, 2, 1], [0, 3, 2],   # bottom
    [4, 5, 6], [4, 6, 7],   # top
    [0, 1, 5], [0, 5, 4],
    [1, 2, 6], [1, 6, 5],
    [2, 3, 7], [2, 7, 6],
    [3, 0, 4], [3, 4, 7],
])


def _box_tris(r: np.ndarray, t: np.ndarray, dims: np.ndarray) -> np.ndarray:
    verts = (_UNIT_BOX_VERTS * dims) @ r.T + t
    return verts[_BOX_TRIS]


def _cylinder_tris(r: np.ndarray, t: np.ndarray, radius: float, height: float,
                   sides: int = 8) -> np.ndarray:
    ang = np.linspace(0.0, 2.0 * math.pi, sides, endpoint=False)
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    lo = np.concatenate([ring, np.full((sides, 1), -height / 2)], axis=1)
    hi = np.concatenate([ring, np.full((sides, 1), height / 2)], axis=1)
    verts = np.concatenate([lo, hi, [[0, 0, -height / 2]], [[0, 0, height / 2]]])
    tris = []
    for i in range(sides):
        j = (i + 1) % sides
        tris += [[i, j, sides + i], [j, sides + j, sides + i]]        # wall
        tris += [[2 * sides, j, i], [2 * sides + 1, sides + i, sides + j]]  # caps
    verts = verts @ r.T + t
    return verts[np.array(tris)]


def _segment_box(a: np.ndarray, b: np.ndarray, thickness: float) -> np.ndarray | None:
    """Oriented box spanning segment a-b (robot link silhouette)."""
    d = b - a
    length = float(np.linalg.norm(d))
    if length < 1e-6:
        return None
    z = d / length
    pick = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(pick, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    r = np.stack([x, y, z], axis=1)
    dims = np.array([thickness, thickness, length])
    return _box_tris(r, (a + b) / 2.0, dims)


def _robot_triangles(model: RobotModel, q: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(triangle batch, color) pairs for the torso, head, and arm links."""
    wanted = ["head"]
    for p in ("l", "r"):
        if f"{p}_palm" in model.frames:
            wanted += [f"{p}_palm"]
    fr = frames_fk(model, q, wanted)
    cache = getattr(model, "_kin_cache")
    q_eff = model.apply_couplings(model.clamp(q))
    steps = cache.steps_for_links(frozenset(model.links))
    rs, ps, _ = _walk(cache, steps, q_eff, False)
    li = cache.link_index

    out: list[tuple[np.ndarray, np.ndarray]] = []
    out.append((_box_tris(np.eye(3), np.array([0.0, 0.0, 0.08]),
                          np.array([0.22, 0.30, 0.42])), ROBOT_COLOR))
    # head box sits on the head link origin; the camera-mount frame pokes out
    # in front of its +x face so the eyes never start inside it
    head_link_t = ps[li["head"]] if "head" in li else fr["head"].t
    out.append((_box_tris(quat_to_matrix(fr["head"].q), head_link_t,
                          np.array([0.10, 0.16, 0.13])), ROBOT_COLOR * 1.05))
    for p in ("l", "r"):
        if f"{p}_sh1" not in li:
            continue
        chain = [ps[li[f"{p}_sh1"]], ps[li[f"{p}_fore"]], ps[li[f"{p}_hand_mount"]]]
        if f"{p}_palm" in model.frames:
            chain.append(fr[f"{p}_palm"].t)
        for a, b, th in zip(chain, chain[1:], (0.07, 0.06, 0.055)):
            tris = _segment_box(a, b, th)
            if tris is not None:
                out.append((tris, ROBOT_COLOR * 0.95))
    return out


def _scene_triangles(objects) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for o in objects:
        r = quat_to_matrix(o.pose.q)
        color = o.color[:3].astype(np.float64)
        if o.shape == "box":
            out.append((_box_tris(r, o.pose.t, o.dims), color))
        else:
            out.append((_cylinder_tris(r, o.pose.t, float(o.dims[0]), float(o.dims[1])), color))
    return out


def _rasterize(batches, cam_r: np.ndarray, cam_t: np.ndarray,
               rig: CameraRig) -> np.ndarray:
    w, h = rig.width, rig.height
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    zbuf = np.full((h, w), np.inf)
    fx = fy = rig.focal_px
    near = 0.05
    rt = cam_r.T
    for tris, color in batches:
        flat = tris.reshape(-1, 3)
        cam = flat @ rt.T + (rt @ -cam_t)
        cam = cam.reshape(-1, 3, 3)
        normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        norms = np.linalg.norm(normals, axis=1)
        ok = norms > 1e-12
        shade = np.zeros(len(tris))
        shade[ok] = np.abs((normals[ok] / norms[ok, None]) @ _LIGHT)
        shades = (0.45 + 0.55 * shade)[:, None] * color[None, :]
        z = cam[:, :, 2]
        visible = np.all(z > near, axis=1) & ok
        if not visible.any():
            continue
        u = fx * cam[:, :, 0] / z + rig.cx
        v = fy * cam[:, :, 1] / z + rig.cy
        inv_z = 1.0 / z
        for ti in np.nonzero(visible)[0]:
            tu, tv, tz = u[ti], v[ti], inv_z[ti]
            x0 = max(int(math.floor(tu.min())), 0)
            x1 = min(int(math.ceil(tu.max())) + 1, w)
            y0 = max(int(math.floor(tv.min())), 0)
            y1 = min(int(math.ceil(tv.max())) + 1, h)
            if x0 >= x1 or y0 >= y1:
                continue
            px = np.arange(x0, x1) + 0.5
            py = (np.arange(y0, y1) + 0.5)[:, None]
            d = (tu[1] - tu[0]) * (tv[2] - tv[0]) - (tu[2] - tu[0]) * (tv[1] - tv[0])
            if abs(d) < 1e-12:
                continue
            a = ((tv[1] - tv[2]) * (px - tu[2]) + (tu[2] - tu[1]) * (py - tv[2])) / d
            b = ((tv[2] - tv[0]) * (px - tu[2]) + (tu[0] - tu[2]) * (py - tv[2])) / d
            c = 1.0 - a - b
            mask = (a >= 0) & (b >= 0) & (c >= 0)
            if not mask.any():
                continue
            zinv = a * tz[0] + b * tz[1] + c * tz[2]
            depth = np.full_like(zinv, np.inf)
            pos = zinv > 1e-12
            depth[pos] = 1.0 / zinv[pos]
            tile = zbuf[y0:y1, x0:x1]
            update = mask & (depth < tile)
            if update.any():
                tile[update] = depth[update]
                img[y0:y1, x0:x1][update] = np.clip(shades[ti], 0, 255).astype(np.uint8)
    return img


def render_stereo(model: RobotModel, q: np.ndarray, objects,
                  rig: CameraRig) -> StereoImage:
    """Render both eyes from the rig mounted on `rig.mount_frame`."""
    head = frames_fk(model, q, [rig.mount_frame])[rig.mount_frame]
    r_head = quat_to_matrix(head.q)
    batches = _scene_triangles(objects) + _robot_triangles(model, q)
    eyes = []
    for sign in (1.0, -1.0):  # left eye sits at +y (robot's left)
        cam_r = r_head @ _R_HEAD_CAM
        cam_t = head.t + r_head @ np.array([0.0, sign * rig.baseline / 2.0, 0.0])
        eyes.append(_rasterize(batches, cam_r, cam_t, rig))
    return StereoImage(eyes[0], eyes[1])
