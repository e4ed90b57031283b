// ConsoleSession: connection lifecycle, 60 Hz outbound frame loop, and a
// latest-value store for inbound state. WebSocket construction is injected so
// the same code runs in the browser and under node tests.

import { Decoded, JointStatePayload, OperatorFramePayload, SceneStatePayload, StereoFramePayload, decodeMessage, encodeControl, encodeHello, encodeOperatorFrame } from "./protocol.js";

export interface WebSocketLike {
  binaryType: string;
  send(data: Uint8Array): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WebSocketLike;

export type BannerState =
  | "disconnected"
  | "connecting"
  | "connected"
  | "rejected"
  | "error";

export interface HelloInfo {
  robot: string;
  actionDim: number;
  rateHz: number;
  role: string;
}

export class ConsoleSession {
  state: BannerState = "disconnected";
  hello: HelloInfo | null = null;
  calibrated = false;
  lastJointState: JointStatePayload | null = null;
  lastSceneState: SceneStatePayload | null = null;
  lastStereo: StereoFramePayload | null = null;
  lastError = "";
  sentFrames = 0;
  private ws: WebSocketLike | null = null;
  private sendTimer: ReturnType<typeof setTimeout> | null = null;
  private controlWaiters: ((data: Record<string, unknown>) => void)[] = [];
  onupdate: (() => void) | null = null;

  constructor(private wsFactory: WsFactory, public rateHz = 60) {}

  connect(url: string, role: "operator" | "viewer"): Promise<HelloInfo> {
    this.state = "connecting";
    return new Promise((resolve, reject) => {
      const ws = this.wsFactory(url);
      ws.binaryType = "arraybuffer";
      this.ws = ws;
      ws.onopen = () => ws.send(encodeHello(role));
      ws.onerror = () => {
        this.state = "error";
        this.lastError = "connection failed";
        reject(new Error(this.lastError));
      };
      ws.onclose = () => {
        if (this.state !== "rejected") this.state = "disconnected";
        this.stopSending();
      };
      ws.onmessage = (ev) => {
        let msg: Decoded;
        try {
          msg = decodeMessage(ev.data as ArrayBuffer);
        } catch {
          return;
        }
        if (this.hello === null) {
          if (msg.kind === "hello" && msg.data["ok"]) {
            this.hello = {
              robot: String(msg.data["robot"]),
              actionDim: Number(msg.data["action_dim"]),
              rateHz: Number(msg.data["rate_hz"]),
              role: String(msg.data["role"]),
            };
            this.state = "connected";
            resolve(this.hello);
          } else if (msg.kind === "control") {
            this.state = "rejected";
            this.lastError = String(msg.data["error"] ?? "rejected");
            reject(new Error(this.lastError));
          }
          return;
        }
        this.dispatch(msg);
      };
    });
  }

  private dispatch(msg: Decoded): void {
    switch (msg.kind) {
      case "joint_state":
        this.lastJointState = msg.state;
        break;
      case "scene_state":
        this.lastSceneState = msg.scene;
        break;
      case "stereo_frame":
        this.lastStereo = msg.stereo;
        break;
      case "control": {
        const waiter = this.controlWaiters.shift();
        if (waiter) waiter(msg.data);
        break;
      }
      default:
        break;
    }
    this.onupdate?.();
  }

  sendControl(data: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (!this.ws || this.state !== "connected") {
      return Promise.reject(new Error("not connected"));
    }
    return new Promise((resolve) => {
      this.controlWaiters.push(resolve);
      this.ws!.send(encodeControl(data));
    });
  }

  /** Sends the calibration reference frame, then the calibrate control. */
  async issueCalibration(frame: OperatorFramePayload): Promise<boolean> {
    if (!this.ws || this.state !== "connected") throw new Error("not connected");
    this.ws.send(encodeOperatorFrame(frame));
    const reply = await this.sendControl({ cmd: "calibrate" });
    this.calibrated = Boolean(reply["ok"]);
    return this.calibrated;
  }

  /** 60 Hz self-correcting loop; never streams before HELLO + calibration. */
  startSending(frameSource: () => OperatorFramePayload): void {
    if (!this.ws || this.state !== "connected" || !this.calibrated) {
      throw new Error("cannot stream before HELLO is accepted and calibration issued");
    }
    this.stopSending();
    const period = 1000 / this.rateHz;
    const started = Date.now();
    let k = 0;
    const step = () => {
      if (this.state !== "connected" || this.ws === null) return;
      this.ws.send(encodeOperatorFrame(frameSource()));
      this.sentFrames += 1;
      k += 1;
      const target = started + k * period;
      this.sendTimer = setTimeout(step, Math.max(0, target - Date.now()));
    };
    this.sendTimer = setTimeout(step, 0);
  }

  stopSending(): void {
    if (this.sendTimer !== null) {
      clearTimeout(this.sendTimer);
      this.sendTimer = null;
    }
  }

  close(): void {
    this.stopSending();
    this.ws?.close();
    this.ws = null;
    this.state = "disconnected";
    this.hello = null;
    this.calibrated = false;
  }
}
