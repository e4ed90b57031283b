// Canvas painters: a third-person 3D view of the robot and scene (client-side
// FK) and the side-by-side stereo panel fed by STEREO_FRAME messages.

import { Vec3, quatRotate, vecAdd, vecSub } from "./math.js";
import { RobotModel, commandToQ, forwardKinematics } from "./model.js";
import { JointStatePayload, SceneStatePayload, StereoFramePayload } from "./protocol.js";

// fixed observer camera: above-right of the robot, looking at the tabletop
const CAM_POS: Vec3 = [1.45, 1.0, 0.75];
const CAM_TARGET: Vec3 = [0.25, 0.0, 0.05];
const FOCAL = 700;

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

const fwd = normalize(vecSub(CAM_TARGET, CAM_POS));
const right = normalize(cross(fwd, [0, 0, 1]));
const up = cross(right, fwd);

export function project(p: Vec3, width: number, height: number): [number, number] | null {
  const d = vecSub(p, CAM_POS);
  const z = d[0] * fwd[0] + d[1] * fwd[1] + d[2] * fwd[2];
  if (z < 0.05) return null;
  const x = d[0] * right[0] + d[1] * right[1] + d[2] * right[2];
  const y = d[0] * up[0] + d[1] * up[1] + d[2] * up[2];
  return [width / 2 + (FOCAL * x) / z, height / 2 - (FOCAL * y) / z];
}

function line(ctx: CanvasRenderingContext2D, a: Vec3, b: Vec3, w: number, h: number): void {
  const pa = project(a, w, h);
  const pb = project(b, w, h);
  if (!pa || !pb) return;
  ctx.beginPath();
  ctx.moveTo(pa[0], pa[1]);
  ctx.lineTo(pb[0], pb[1]);
  ctx.stroke();
}

function dot(ctx: CanvasRenderingContext2D, p: Vec3, r: number, w: number, h: number): void {
  const pp = project(p, w, h);
  if (!pp) return;
  ctx.beginPath();
  ctx.arc(pp[0], pp[1], r, 0, 2 * Math.PI);
  ctx.fill();
}

const ARM_CHAIN = ["sh1", "fore", "hand_mount", "hand"];

export function drawScene(
  canvas: HTMLCanvasElement,
  model: RobotModel | null,
  joint: JointStatePayload | null,
  scene: SceneStatePayload | null,
  gizmos: { left: Vec3; right: Vec3 } | null,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#14171c";
  ctx.fillRect(0, 0, w, h);

  ctx.strokeStyle = "#2a2f38";
  ctx.lineWidth = 1;
  for (let i = -4; i <= 8; i++) {
    line(ctx, [i * 0.1, -0.6, -0.3], [i * 0.1, 0.6, -0.3], w, h);
  }
  for (let j = -6; j <= 6; j++) {
    line(ctx, [-0.4, j * 0.1, -0.3], [0.8, j * 0.1, -0.3], w, h);
  }

  if (scene) {
    for (const o of scene.objects) {
      const p: Vec3 = [o.pose[4], o.pose[5], o.pose[6]];
      const attached = (o.flags & 1) !== 0;
      ctx.fillStyle = `rgba(${o.rgba[0]},${o.rgba[1]},${o.rgba[2]},0.9)`;
      if (o.shape === 1) {
        dot(ctx, p, attached ? 8 : 6, w, h);
      } else {
        const pp = project(p, w, h);
        if (pp) {
          const sx = Math.max(o.dims[0] * 220, 6);
          const sy = Math.max(o.dims[1] * 220, 6);
          ctx.fillRect(pp[0] - sx / 2, pp[1] - sy / 2, sx, sy);
        }
      }
      if (attached) {
        ctx.strokeStyle = "#ffd34d";
        ctx.lineWidth = 2;
        const pp = project(p, w, h);
        if (pp) {
          ctx.beginPath();
          ctx.arc(pp[0], pp[1], 10, 0, 2 * Math.PI);
          ctx.stroke();
        }
      }
    }
  }

  if (model && joint) {
    const q = commandToQ(model, joint.measured);
    const fk = forwardKinematics(model, q);
    ctx.strokeStyle = "#9aa3b2";
    ctx.lineWidth = 3;
    const base = fk.linkPoses.get("base");
    const head = fk.linkPoses.get("head");
    if (base && head) line(ctx, base.t, head.t, w, h);
    for (const prefix of ["l", "r"]) {
      let prev: Vec3 | null = null;
      for (const seg of ARM_CHAIN) {
        const pose = fk.linkPoses.get(`${prefix}_${seg}`);
        if (!pose) continue;
        if (prev) line(ctx, prev, pose.t, w, h);
        prev = pose.t;
      }
      const palm = model.frames.has(`${prefix}_palm`) ? fk.framePose(`${prefix}_palm`) : null;
      if (prev && palm) line(ctx, prev, palm.t, w, h);
      if (palm) {
        ctx.fillStyle = "#cdd6e4";
        dot(ctx, palm.t, 4, w, h);
      }
    }
    if (head) {
      ctx.fillStyle = "#cdd6e4";
      dot(ctx, head.t, 6, w, h);
      const gaze = vecAdd(head.t, quatRotate(head.q, [0.15, 0, 0]));
      ctx.strokeStyle = "#6fb7ff";
      ctx.lineWidth = 2;
      line(ctx, head.t, gaze, w, h);
    }
  }

  if (gizmos) {
    for (const [color, p] of [["#7cc4ff", gizmos.left], ["#ff9f7c", gizmos.right]] as const) {
      ctx.fillStyle = color;
      dot(ctx, p, 5, w, h);
      ctx.strokeStyle = color;
      ctx.lineWidth = 1;
      line(ctx, [p[0], p[1], p[2] - 0.04], [p[0], p[1], p[2] + 0.04], w, h);
    }
  }
}

export function drawStereo(canvas: HTMLCanvasElement, stereo: StereoFramePayload | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  if (!stereo) {
    ctx.fillStyle = "#0c0e12";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = stereo.width * 2;
  canvas.height = stereo.height;
  const img = ctx.createImageData(stereo.width * 2, stereo.height);
  for (let y = 0; y < stereo.height; y++) {
    for (let x = 0; x < stereo.width; x++) {
      const si = (y * stereo.width + x) * 3;
      for (const [buf, xoff] of [[stereo.left, 0], [stereo.right, stereo.width]] as const) {
        const di = (y * stereo.width * 2 + x + xoff) * 4;
        img.data[di] = buf[si];
        img.data[di + 1] = buf[si + 1];
        img.data[di + 2] = buf[si + 2];
        img.data[di + 3] = 255;
      }
    }
  }
  ctx.putImageData(img, 0, 0);
}
