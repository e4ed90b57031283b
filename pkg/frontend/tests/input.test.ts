import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { HeadControl, PinchModel, WristGizmo } from "../src/input.js";
import { poseIdentity } from "../src/math.js";
import { parseModel } from "../src/model.js";

const H1 = parseModel(readFileSync(
  new URL("../../src/otv/data/models/h1-like.model", import.meta.url), "utf-8"));

describe("head control", () => {
  it("reads limits from the model and clamps drags", () => {
    const head = new HeadControl(H1);
    expect(head.yawLimit).toBeCloseTo(1.3, 9);
    head.drag(100000, 0); // a full-right drag
    expect(head.yaw).toBe(head.yawLimit);
    head.drag(-1000000, 0);
    expect(head.yaw).toBe(-head.yawLimit);
  });

  it("yaw quaternion rotates about +z", () => {
    const head = new HeadControl(H1);
    head.drag(0.3 / head.radPerPixel, 0);
    const q = head.quat();
    expect(q[0]).toBeCloseTo(Math.cos(0.15), 6);
    expect(q[3]).toBeCloseTo(Math.sin(0.15), 6);
  });
});

describe("wrist gizmo", () => {
  it("moves in the screen plane and depth", () => {
    const g = new WristGizmo([0.3, 0.0, 0.2]);
    g.dragPlane(100, -50);
    expect(g.position[1]).toBeLessThan(0); // drag right = robot -y
    expect(g.position[2]).toBeGreaterThan(0.2);
    g.dragDepth(5);
    expect(g.position[0]).toBeCloseTo(0.35, 9);
  });
});

describe("pinch model", () => {
  it("open and closed sets come from the robot's own hand", () => {
    const pinch = new PinchModel(H1, "l", 1.1);
    const open = pinch.keypoints(0, poseIdentity());
    const closed = pinch.keypoints(1, poseIdentity());
    const dist = (a: Float32Array, i: number, j: number) =>
      Math.hypot(a[3 * i] - a[3 * j], a[3 * i + 1] - a[3 * j + 1], a[3 * i + 2] - a[3 * j + 2]);
    const openPinch = dist(open, 1, 2);   // thumb tip to index tip
    const closedPinch = dist(closed, 1, 2);
    expect(openPinch).toBeGreaterThan(0.08);
    expect(closedPinch).toBeLessThan(0.02);
    // halfway interpolates linearly
    const mid = pinch.keypoints(0.5, poseIdentity());
    expect(mid[3]).toBeCloseTo((open[3] + closed[3]) / 2, 9);
  });

  it("keypoints ride the wrist pose", () => {
    const pinch = new PinchModel(H1, "l", 1.1);
    const base = pinch.keypoints(0, poseIdentity());
    const moved = pinch.keypoints(0, { q: [1, 0, 0, 0], t: [0.1, 0.2, 0.3] });
    expect(moved[0] - base[0]).toBeCloseTo(0.1, 5);
    expect(moved[1] - base[1]).toBeCloseTo(0.2, 5);
    expect(moved[2] - base[2]).toBeCloseTo(0.3, 5);
  });
});
