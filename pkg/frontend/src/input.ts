// Input models, kept DOM-free so they are unit-testable: dragging steers the
// head, gizmos move the wrist targets, and a pinch parameter shapes the six
// hand keypoints by interpolating open/closed sets derived from the robot's
// own hand FK.

import { Pose, Quat, Vec3, headQuat, poseApply, quatFromAxisAngle, quatMul, quatNormalize, quatRotate } from "./math.js";
import { RobotModel, forwardKinematics, jointLimitsOf } from "./model.js";

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

export class HeadControl {
  yaw = 0;
  pitch = 0;
  yawLimit: number;
  pitchLimit: number;
  radPerPixel: number;

  constructor(model: RobotModel | null, radPerPixel = 0.005) {
    this.radPerPixel = radPerPixel;
    this.yawLimit = 1.3;
    this.pitchLimit = 0.7;
    if (model) {
      try {
        const [lo, hi] = jointLimitsOf(model, "neck_yaw");
        this.yawLimit = Math.min(-lo, hi);
        const [plo, phi] = jointLimitsOf(model, "neck_pitch");
        this.pitchLimit = Math.min(-plo, phi);
      } catch {
        // model without a neck keeps the defaults
      }
    }
  }

  /** Dragging right increases yaw; dragging down pitches down. */
  drag(dxPixels: number, dyPixels: number): void {
    this.yaw = clamp(this.yaw + dxPixels * this.radPerPixel, -this.yawLimit, this.yawLimit);
    this.pitch = clamp(this.pitch + dyPixels * this.radPerPixel, -this.pitchLimit, this.pitchLimit);
  }

  quat(): Quat {
    return headQuat(this.yaw, this.pitch);
  }
}

export class WristGizmo {
  position: Vec3;
  yaw = 0;
  pitch = 0;

  constructor(start: Vec3) {
    this.position = [...start] as Vec3;
  }

  /** Screen-plane drag: x maps to robot-lateral (-y), y to height (-z). */
  dragPlane(dx: number, dy: number, metersPerPixel = 0.0012): void {
    this.position[1] -= dx * metersPerPixel;
    this.position[2] -= dy * metersPerPixel;
  }

  /** Wheel / depth key: move along the robot forward axis. */
  dragDepth(amount: number, metersPerStep = 0.01): void {
    this.position[0] += amount * metersPerStep;
  }

  rotate(dyaw: number, dpitch: number): void {
    this.yaw += dyaw;
    this.pitch += dpitch;
  }

  pose(): Pose {
    return {
      q: quatNormalize(quatMul(quatFromAxisAngle([0, 0, 1], this.yaw),
                               quatFromAxisAngle([0, 1, 0], this.pitch))),
      t: [...this.position] as Vec3,
    };
  }
}

const DEX_CLOSED: Record<string, number> = {
  thumb_cmc_yaw: 1.0, thumb_cmc_pitch: 0.4,
  index_mcp: 1.1, middle_mcp: 1.1, ring_mcp: 1.1, pinky_mcp: 1.1,
};

const TIP_ORDER = ["thumb_tip", "index_tip", "middle_tip", "ring_tip", "pinky_tip"];

export class PinchModel {
  /** wrist-local keypoint sets, rows: wrist + 5 fingertips */
  openSet: Vec3[];
  closedSet: Vec3[];

  constructor(model: RobotModel | null, prefix: "l" | "r", alpha: number) {
    if (model && model.frames.has(`${prefix}_thumb_tip`)) {
      this.openSet = this.fromFk(model, prefix, alpha, 0);
      this.closedSet = this.fromFk(model, prefix, alpha, 1);
    } else {
      // gripper tier: a parametric pinch between thumb and index
      const d = 0.12 / (alpha || 1);
      this.openSet = [
        [0, 0, 0], [0.10, d / 2, 0], [0.10, -d / 2, 0],
        [0.11, -0.02, 0], [0.10, -0.03, 0], [0.09, -0.04, 0]];
      this.closedSet = [
        [0, 0, 0], [0.10, 0, 0], [0.10, 0, 0],
        [0.11, -0.02, 0], [0.10, -0.03, 0], [0.09, -0.04, 0]];
    }
  }

  private fromFk(model: RobotModel, prefix: string, alpha: number, pinch: number): Vec3[] {
    const q = new Array(model.movableNames.length).fill(0);
    for (const [stem, value] of Object.entries(DEX_CLOSED)) {
      const idx = model.jointIndex.get(`${prefix}_${stem}`);
      if (idx !== undefined) q[idx] = value * pinch;
    }
    for (const c of model.couplings) {
      const di = model.jointIndex.get(c.driven);
      const si = model.jointIndex.get(c.driver);
      if (di !== undefined && si !== undefined) q[di] = c.ratio * q[si];
    }
    const fk = forwardKinematics(model, q);
    const wrist = fk.framePose(`${prefix}_wrist`);
    const conj: Quat = [wrist.q[0], -wrist.q[1], -wrist.q[2], -wrist.q[3]];
    const toWristLocal = (p: Vec3): Vec3 => {
      const d: Vec3 = [p[0] - wrist.t[0], p[1] - wrist.t[1], p[2] - wrist.t[2]];
      const local = quatRotate(conj, d);
      return [local[0] / alpha, local[1] / alpha, local[2] / alpha];
    };
    const rows: Vec3[] = [[0, 0, 0]];
    for (const tip of TIP_ORDER) rows.push(toWristLocal(fk.framePose(`${prefix}_${tip}`).t));
    return rows;
  }

  /** World-frame 6x3 keypoints at the given pinch in [0, 1]. */
  keypoints(pinch: number, wrist: Pose): Float32Array {
    const p = clamp(pinch, 0, 1);
    const out = new Float32Array(18);
    for (let i = 0; i < 6; i++) {
      const local: Vec3 = [
        (1 - p) * this.openSet[i][0] + p * this.closedSet[i][0],
        (1 - p) * this.openSet[i][1] + p * this.closedSet[i][1],
        (1 - p) * this.openSet[i][2] + p * this.closedSet[i][2],
      ];
      const world = poseApply(wrist, local);
      out[3 * i] = world[0];
      out[3 * i + 1] = world[1];
      out[3 * i + 2] = world[2];
    }
    return out;
  }
}
