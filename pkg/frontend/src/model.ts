// Parser and forward kinematics for the server's robot model file format.
// Mirrors the wire contract: the console fetches the model from GET /model
// and runs its own FK so link positions never need streaming.

import { Pose, Quat, Vec3, poseApply, quatFromAxisAngle, quatFromRpy, quatMul, quatNormalize, quatRotate, vecAdd } from "./math.js";

export interface Joint {
  name: string;
  kind: "revolute" | "prismatic" | "fixed";
  parent: string;
  child: string;
  originQ: Quat;
  originT: Vec3;
  axis: Vec3;
  limits: [number, number];
  actuated: boolean;
}

export interface FrameDef {
  name: string;
  link: string;
  offsetQ: Quat;
  offsetT: Vec3;
}

export interface RobotModel {
  name: string;
  joints: Joint[];
  frames: Map<string, FrameDef>;
  couplings: { driven: string; driver: string; ratio: number }[];
  actionLayout: string[];
  movableNames: string[];
  jointIndex: Map<string, number>;
  links: string[];
}

function parseVec(token: string, n: number, line: number): number[] {
  const parts = token.split(",").map(Number);
  if (parts.length !== n || parts.some((x) => !Number.isFinite(x))) {
    throw new Error(`line ${line}: bad ${n}-vector '${token}'`);
  }
  return parts;
}

export function parseModel(text: string): RobotModel {
  let name: string | null = null;
  const joints: Joint[] = [];
  const frames = new Map<string, FrameDef>();
  const couplings: { driven: string; driver: string; ratio: number }[] = [];
  let layout: string[] = [];

  text.split("\n").forEach((raw, i) => {
    const line = raw.split("#")[0].trim();
    if (!line) return;
    const tokens = line.split(/\s+/);
    const head = tokens[0];
    const kv = new Map<string, string>();
    const bare: string[] = [];
    for (const tok of tokens.slice(1)) {
      const eq = tok.indexOf("=");
      if (eq > 0) kv.set(tok.slice(0, eq), tok.slice(eq + 1));
      else bare.push(tok);
    }
    if (head === "robot") {
      name = tokens[1];
    } else if (head === "joint") {
      const kind = tokens[2] as Joint["kind"];
      const xyz = kv.has("xyz") ? parseVec(kv.get("xyz")!, 3, i + 1) : [0, 0, 0];
      const rpy = kv.has("rpy") ? parseVec(kv.get("rpy")!, 3, i + 1) : [0, 0, 0];
      const axis = kv.has("axis") ? parseVec(kv.get("axis")!, 3, i + 1) : [0, 0, 1];
      const lim = kv.has("limits") ? parseVec(kv.get("limits")!, 2, i + 1)
        : kind === "revolute" ? [-Math.PI, Math.PI] : [-1, 1];
      const an = Math.hypot(axis[0], axis[1], axis[2]) || 1;
      joints.push({
        name: tokens[1],
        kind,
        parent: kv.get("parent")!,
        child: kv.get("child")!,
        originQ: quatFromRpy(rpy[0], rpy[1], rpy[2]),
        originT: xyz as Vec3,
        axis: [axis[0] / an, axis[1] / an, axis[2] / an],
        limits: [lim[0], lim[1]],
        actuated: bare.includes("actuated"),
      });
    } else if (head === "frame") {
      const xyz = kv.has("xyz") ? parseVec(kv.get("xyz")!, 3, i + 1) : [0, 0, 0];
      const rpy = kv.has("rpy") ? parseVec(kv.get("rpy")!, 3, i + 1) : [0, 0, 0];
      frames.set(tokens[1], {
        name: tokens[1],
        link: kv.get("link")!,
        offsetQ: quatFromRpy(rpy[0], rpy[1], rpy[2]),
        offsetT: xyz as Vec3,
      });
    } else if (head === "couple") {
      couplings.push({
        driven: kv.get("driven")!,
        driver: kv.get("driver")!,
        ratio: kv.has("ratio") ? Number(kv.get("ratio")) : 1.0,
      });
    } else if (head === "action_layout") {
      layout = tokens.slice(1).join("").split(",").filter((s) => s);
    }
  });

  if (name === null || joints.length === 0) throw new Error("empty model document");
  const movableNames = joints.filter((j) => j.kind !== "fixed").map((j) => j.name);
  const jointIndex = new Map(movableNames.map((n, i) => [n, i]));
  const links = Array.from(new Set(["base", ...joints.map((j) => j.child)]));
  return { name, joints, frames, couplings, actionLayout: layout, movableNames, jointIndex, links };
}

/** Expand an action-layout command into a full joint vector (couplings applied). */
export function commandToQ(model: RobotModel, command: Float32Array | number[]): number[] {
  const q = new Array(model.movableNames.length).fill(0);
  model.actionLayout.forEach((nameJ, i) => {
    const idx = model.jointIndex.get(nameJ);
    if (idx !== undefined) q[idx] = command[i];
  });
  for (const c of model.couplings) {
    const di = model.jointIndex.get(c.driven);
    const si = model.jointIndex.get(c.driver);
    if (di !== undefined && si !== undefined) q[di] = c.ratio * q[si];
  }
  return q;
}

export interface FkResult {
  linkPoses: Map<string, Pose>;
  framePose(name: string): Pose;
}

/** Forward kinematics over the whole tree (models here are small). */
export function forwardKinematics(model: RobotModel, q: number[]): FkResult {
  const poses = new Map<string, Pose>();
  poses.set("base", { q: [1, 0, 0, 0], t: [0, 0, 0] });
  const pending = [...model.joints];
  let guard = 0;
  while (pending.length > 0 && guard++ < 10000) {
    const j = pending.shift()!;
    const parent = poses.get(j.parent);
    if (!parent) {
      pending.push(j);
      continue;
    }
    let rotQ = quatNormalize(quatMul(parent.q, j.originQ));
    let t = vecAdd(quatRotate(parent.q, j.originT), parent.t);
    if (j.kind === "revolute") {
      const idx = model.jointIndex.get(j.name)!;
      rotQ = quatNormalize(quatMul(rotQ, quatFromAxisAngle(j.axis, q[idx])));
    } else if (j.kind === "prismatic") {
      const idx = model.jointIndex.get(j.name)!;
      t = vecAdd(t, quatRotate(rotQ, [j.axis[0] * q[idx], j.axis[1] * q[idx], j.axis[2] * q[idx]]));
    }
    poses.set(j.child, { q: rotQ, t });
  }
  return {
    linkPoses: poses,
    framePose(name: string): Pose {
      const f = model.frames.get(name);
      if (!f) throw new Error(`no frame '${name}'`);
      const base = poses.get(f.link);
      if (!base) throw new Error(`link '${f.link}' missing from FK`);
      return {
        q: quatNormalize(quatMul(base.q, f.offsetQ)),
        t: poseApply(base, f.offsetT),
      };
    },
  };
}

export function jointLimitsOf(model: RobotModel, name: string): [number, number] {
  const j = model.joints.find((jj) => jj.name === name);
  if (!j) throw new Error(`no joint '${name}'`);
  return j.limits;
}
