"""SE(3) rigid transforms as unit quaternion + translation.

Conventions: Hamilton quaternions stored (w, x, y, z) with w >= 0 after every
normalization (bitwise-reproducible canonical sign); translations in meters;
angles in radians. Twists are (angular, linear) log-coordinates, matching the
(angular; linear) row order used by the geometric Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi

_CUT_LOCUS_MARGIN = 1e-6


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize and canonicalize sign (w >= 0; tie broken on x, y, z)."""
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _cross3(a, b) -> np.ndarray:
    # np.cross has large per-call overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    u = q[1:]
    w = q[0]
    uv = _cross3(u, v)
    return np.asarray(v, dtype=float) + 2.0 * (w * uv + _cross3(u, uv))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = math.sqrt(float(axis @ axis))
    if n == 0.0:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle
    s = math.sin(half) / n
    return quat_normalize(np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s]))


def quat_from_rotvec(w: np.ndarray) -> np.ndarray:
    """Quaternion from a rotation vector (axis * angle)."""
    w = np.asarray(w, dtype=float)
    angle = math.sqrt(float(w @ w))
    if angle < 1e-12:
        # first-order: sin(a/2)/a ~ 1/2 - a^2/48
        s = 0.5 - angle * angle / 48.0
        return quat_normalize(np.array([1.0, w[0] * s, w[1] * s, w[2] * s]))
    s = math.sin(0.5 * angle) / angle
    return quat_normalize(np.array([math.cos(0.5 * angle), w[0] * s, w[1] * s, w[2] * s]))


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector of a canonical (w >= 0) unit quaternion; angle in [0, pi]."""
    xyz = np.asarray(q[1:], dtype=float)
    s = math.sqrt(float(xyz @ xyz))
    angle = 2.0 * math.atan2(s, float(q[0]))
    if s < 1e-12:
        return xyz * 2.0  # small-angle: q ~ (1, w/2)
    return xyz * (angle / s)


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's branch method)."""
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s,
                      0.25 * s,
                      (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s,
                      (r[0, 1] + r[1, 0]) / s,
                      0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s,
                      (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def rpy_to_quat(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis XYZ (URDF rpy) rotation: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return quat_normalize(quat_mul(quat_mul(qz, qy), qx))


def quat_to_zyx(q: np.ndarray) -> tuple[float, float, float]:
    """Intrinsic Z-Y-X Euler angles (yaw, pitch, roll) of a unit quaternion."""
    r = quat_to_matrix(q)
    sp = -r[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-9:
        # gimbal lock: yaw absorbs the free angle, roll pinned to zero
        yaw = math.atan2(-r[0, 1], r[1, 1])
        roll = 0.0
    else:
        yaw = math.atan2(r[1, 0], r[0, 0])
        roll = math.atan2(r[2, 1], r[2, 2])
    return yaw, pitch, roll


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation quaternion (w, x, y, z) and translation (m)."""

    q: np.ndarray
    t: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_parts(q, t) -> "Pose":
        return Pose(quat_normalize(np.asarray(q, dtype=float)),
                    np.asarray(t, dtype=float).copy())

    @staticmethod
    def from_rpy_xyz(rpy, xyz) -> "Pose":
        return Pose(rpy_to_quat(*rpy), np.asarray(xyz, dtype=float).copy())

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Map a point from this pose's frame into the parent frame."""
        return quat_rotate(self.q, p) + self.t

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.q)
        m[:3, 3] = self.t
        return m

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        """Pose equality up to quaternion double cover."""
        dq = min(float(np.abs(self.q - other.q).max()),
                 float(np.abs(self.q + other.q).max()))
        return dq <= tol and float(np.abs(self.t - other.t).max()) <= tol


@dataclass(frozen=True)
class Twist:
    """Log-coordinates of a relative pose: angular (rad), linear (m)."""

    angular: np.ndarray
    linear: np.ndarray

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        """6-vector in (angular; linear) order."""
        return np.concatenate([self.angular, self.linear])

    @staticmethod
    def from_vector(v: np.ndarray) -> "Twist":
        v = np.asarray(v, dtype=float)
        return Twist(v[:3].copy(), v[3:6].copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vector()))


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _exp_v_matrix(w: np.ndarray) -> np.ndarray:
    """V(w) with exp translation = V @ linear."""
    theta2 = float(w @ w)
    wx = _skew(w)
    if theta2 < 1e-8:
        # series: a = 1/2 - t^2/24, b = 1/6 - t^2/120
        a = 0.5 - theta2 / 24.0
        b = 1.0 / 6.0 - theta2 / 120.0
    else:
        theta = math.sqrt(theta2)
        a = (1.0 - math.cos(theta)) / theta2
        b = (theta - math.sin(theta)) / (theta2 * theta)
    return np.eye(3) + a * wx + b * (wx @ wx)


def _log_v_inverse(w: np.ndarray) -> np.ndarray:
    theta2 = float(w @ w)
    wx = _skew(w)
    if theta2 < 1e-4:
        # series for c, which cancels catastrophically near zero
        c = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    else:
        theta = math.sqrt(theta2)
        c = (1.0 - 0.5 * theta * math.sin(theta) / (1.0 - math.cos(theta))) / theta2
    return np.eye(3) - 0.5 * wx + c * (wx @ wx)


def se3_compose(a: Pose, b: Pose) -> Pose:
    """a then b in a's frame: T_a * T_b."""
    return Pose(quat_normalize(quat_mul(a.q, b.q)), quat_rotate(a.q, b.t) + a.t)


def se3_inverse(a: Pose) -> Pose:
    qi = quat_normalize(quat_conj(a.q))
    return Pose(qi, -quat_rotate(qi, a.t))


def se3_log(t: Pose) -> Twist:
    """Log map; raises AngleNearPi within 1e-6 of the rotation cut locus."""
    w = quat_to_rotvec(quat_normalize(t.q))
    angle = math.sqrt(float(w @ w))
    if angle > math.pi - _CUT_LOCUS_MARGIN:
        raise AngleNearPi(f"rotation angle {angle:.9f} too close to pi")
    linear = _log_v_inverse(w) @ np.asarray(t.t, dtype=float)
    return Twist(w, linear)


def se3_exp(v: Twist) -> Pose:
    q = quat_from_rotvec(v.angular)
    t = _exp_v_matrix(np.asarray(v.angular, dtype=float)) @ np.asarray(v.linear, dtype=float)
    return Pose(q, t)


def se3_interpolate(a: Pose, b: Pose, frac: float) -> Pose:
    """Geodesic point a * exp(frac * log(a^-1 b)); frac in [0, 1]."""
    if not 0.0 <= frac <= 1.0:
        raise ValueError(f"interpolation fraction {frac} outside [0, 1]")
    rel = se3_log(se3_compose(se3_inverse(a), b))
    step = Twist(rel.angular * frac, rel.linear * frac)
    return se3_compose(a, se3_exp(step))


def se3_distance(a: Pose, b: Pose) -> float:
    """Log-norm distance between two poses."""
    return se3_log(se3_compose(se3_inverse(a), b)).norm()
