// Browser wiring: DOM events -> input models -> 60 Hz OPERATOR_FRAME stream,
// plus the 3D and stereo panels.

import { HeadControl, PinchModel, WristGizmo } from "./input.js";
import { Vec3 } from "./math.js";
import { RobotModel, parseModel } from "./model.js";
import { OperatorFramePayload, VALID_HAND_LEFT, VALID_HAND_RIGHT, VALID_HEAD, VALID_WRIST_LEFT, VALID_WRIST_RIGHT } from "./protocol.js";
import { drawScene, drawStereo } from "./render.js";
import { ConsoleSession } from "./session.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const session = new ConsoleSession((url) => new WebSocket(url) as never);
let model: RobotModel | null = null;
let head: HeadControl = new HeadControl(null);
let gizmoL = new WristGizmo([0.32, 0.24, 0.18]);
let gizmoR = new WristGizmo([0.32, -0.24, 0.18]);
let pinchL: PinchModel | null = null;
let pinchR: PinchModel | null = null;
let pinchValueL = 0;
let pinchValueR = 0;
let activeGizmo: "left" | "right" | "head" = "head";
let recording = false;

function banner(text: string, kind: "ok" | "bad" | "info" = "info"): void {
  const el = $("banner");
  el.textContent = text;
  el.className = `banner ${kind}`;
}

function operatorFrame(): OperatorFramePayload {
  const hq = head.quat();
  const headArr = new Float32Array([hq[0], hq[1], hq[2], hq[3], 0, 0, 0.45]);
  const poseL = gizmoL.pose();
  const poseR = gizmoR.pose();
  const wl = new Float32Array([...poseL.q, ...poseL.t]);
  const wr = new Float32Array([...poseR.q, ...poseR.t]);
  const hl = pinchL ? pinchL.keypoints(pinchValueL, poseL) : new Float32Array(18);
  const hr = pinchR ? pinchR.keypoints(pinchValueR, poseR) : new Float32Array(18);
  let validity = VALID_HEAD | VALID_WRIST_LEFT | VALID_WRIST_RIGHT;
  if (pinchL) validity |= VALID_HAND_LEFT;
  if (pinchR) validity |= VALID_HAND_RIGHT;
  return {
    timestamp: performance.now() / 1000,
    head: headArr,
    wristLeft: wl,
    wristRight: wr,
    handLeft: hl,
    handRight: hr,
    validity,
  };
}

async function connect(): Promise<void> {
  const host = location.host || "127.0.0.1:8080";
  const role = ($("role") as HTMLSelectElement).value as "operator" | "viewer";
  banner("connecting...");
  try {
    const info = await session.connect(`ws://${host}/ws`, role);
    banner(`connected to ${info.robot} (${info.actionDim}-dim commands) as ${info.role}`, "ok");
  } catch (e) {
    banner(`rejected: ${(e as Error).message}`, "bad");
    return;
  }
  const text = await (await fetch("/model")).text();
  model = parseModel(text);
  head = new HeadControl(model);
  pinchL = new PinchModel(model, "l", 1.1);
  pinchR = new PinchModel(model, "r", 1.1);
  if (session.hello?.role === "operator") {
    const ok = await session.issueCalibration(operatorFrame());
    banner(ok ? "calibrated; streaming at 60 Hz" : "calibration refused", ok ? "ok" : "bad");
    if (ok) {
      await session.sendControl({ cmd: "set_mode", mode: "teleop" });
      session.startSending(operatorFrame);
    }
  }
}

function wireInputs(): void {
  const view = $("view") as HTMLCanvasElement;
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  view.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    view.setPointerCapture(ev.pointerId);
  });
  view.addEventListener("pointerup", () => (dragging = false));
  view.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (activeGizmo === "head") head.drag(dx, dy);
    else (activeGizmo === "left" ? gizmoL : gizmoR).dragPlane(dx, dy);
  });
  view.addEventListener("wheel", (ev) => {
    if (activeGizmo === "left") gizmoL.dragDepth(-Math.sign(ev.deltaY));
    if (activeGizmo === "right") gizmoR.dragDepth(-Math.sign(ev.deltaY));
    ev.preventDefault();
  });
  for (const mode of ["head", "left", "right"] as const) {
    $(`mode-${mode}`).addEventListener("click", () => {
      activeGizmo = mode;
      banner(`steering: ${mode}`, "info");
    });
  }
  ($("pinch-l") as HTMLInputElement).addEventListener("input", (ev) => {
    pinchValueL = Number((ev.target as HTMLInputElement).value) / 100;
  });
  ($("pinch-r") as HTMLInputElement).addEventListener("input", (ev) => {
    pinchValueR = Number((ev.target as HTMLInputElement).value) / 100;
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "q") pinchValueL = Math.min(1, pinchValueL + 0.1);
    if (ev.key === "a") pinchValueL = Math.max(0, pinchValueL - 0.1);
    if (ev.key === "e") pinchValueR = Math.min(1, pinchValueR + 0.1);
    if (ev.key === "d") pinchValueR = Math.max(0, pinchValueR - 0.1);
  });
  $("connect").addEventListener("click", () => void connect());
  $("record").addEventListener("click", async () => {
    const reply = await session.sendControl(
      { cmd: recording ? "stop_recording" : "start_recording" });
    if (reply["ok"]) {
      recording = !recording;
      $("record").textContent = recording ? "stop recording" : "start recording";
      banner(recording ? "recording" : `saved ${reply["num_steps"] ?? ""} steps`, "ok");
    } else {
      banner(String(reply["error"]), "bad");
    }
  });
  $("autonomous").addEventListener("click", async () => {
    session.stopSending();
    await session.sendControl({ cmd: "set_mode", mode: "autonomous" });
    banner("autonomous mode: scripted producer active", "ok");
  });
  $("teleop").addEventListener("click", async () => {
    await session.sendControl({ cmd: "set_mode", mode: "teleop" });
    if (session.calibrated) session.startSending(operatorFrame);
    banner("teleop mode", "ok");
  });
}

function renderLoop(): void {
  const view = $("view") as HTMLCanvasElement;
  const stereo = $("stereo") as HTMLCanvasElement;
  const paint = () => {
    drawScene(view, model, session.lastJointState, session.lastSceneState, {
      left: gizmoL.position as Vec3,
      right: gizmoR.position as Vec3,
    });
    drawStereo(stereo, session.lastStereo);
    const js = session.lastJointState;
    $("status").textContent = js
      ? `t=${js.timestamp.toFixed(2)}s  sent=${session.sentFrames}  ` +
        `head yaw=${head.yaw.toFixed(2)} pitch=${head.pitch.toFixed(2)}`
      : "no joint state yet";
    requestAnimationFrame(paint);
  };
  requestAnimationFrame(paint);
}

wireInputs();
renderLoop();
banner("ready; pick a role and connect", "info");
