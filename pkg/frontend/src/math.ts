// Minimal quaternion / vector math matching the server conventions:
// Hamilton quaternions [w, x, y, z], translations in meters.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export const QUAT_IDENTITY: Quat = [1, 0, 0, 0];

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) throw new Error("zero quaternion");
  let out: Quat = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
  if (out[0] < 0) out = [-out[0], -out[1], -out[2], -out[3]];
  return out;
}

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  const s = Math.sin(angle / 2) / n;
  return [Math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const ux = y * v[2] - z * v[1];
  const uy = z * v[0] - x * v[2];
  const uz = x * v[1] - y * v[0];
  return [
    v[0] + 2 * (w * ux + y * uz - z * uy),
    v[1] + 2 * (w * uy + z * ux - x * uz),
    v[2] + 2 * (w * uz + x * uy - y * ux),
  ];
}

export function vecAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vecSub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vecScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vecNorm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export interface Pose {
  q: Quat;
  t: Vec3;
}

export function poseIdentity(): Pose {
  return { q: [1, 0, 0, 0], t: [0, 0, 0] };
}

export function poseCompose(a: Pose, b: Pose): Pose {
  return { q: quatNormalize(quatMul(a.q, b.q)), t: vecAdd(quatRotate(a.q, b.t), a.t) };
}

export function poseApply(p: Pose, v: Vec3): Vec3 {
  return vecAdd(quatRotate(p.q, v), p.t);
}

// URDF-style fixed-axis rpy: R = Rz(yaw) Ry(pitch) Rx(roll)
export function quatFromRpy(roll: number, pitch: number, yaw: number): Quat {
  const qz = quatFromAxisAngle([0, 0, 1], yaw);
  const qy = quatFromAxisAngle([0, 1, 0], pitch);
  const qx = quatFromAxisAngle([1, 0, 0], roll);
  return quatNormalize(quatMul(quatMul(qz, qy), qx));
}

// head orientation used by the console: yaw about Z then pitch about Y
export function headQuat(yaw: number, pitch: number): Quat {
  return quatNormalize(quatMul(quatFromAxisAngle([0, 0, 1], yaw),
                               quatFromAxisAngle([0, 1, 0], pitch)));
}
