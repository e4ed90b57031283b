// Binary wire codec mirroring the server: one tag byte, little-endian payload.

export const HELLO = 0x01;
export const OPERATOR_FRAME = 0x02;
export const JOINT_STATE = 0x03;
export const SCENE_STATE = 0x04;
export const STEREO_FRAME = 0x05;
export const CONTROL = 0x06;
export const STATS = 0x07;

export const PROTOCOL_VERSION = 1;

export const VALID_HEAD = 0x01;
export const VALID_WRIST_LEFT = 0x02;
export const VALID_WRIST_RIGHT = 0x04;
export const VALID_HAND_LEFT = 0x08;
export const VALID_HAND_RIGHT = 0x10;

export interface OperatorFramePayload {
  timestamp: number;
  head: Float32Array;        // 7: qw qx qy qz tx ty tz
  wristLeft: Float32Array;   // 7
  wristRight: Float32Array;  // 7
  handLeft: Float32Array;    // 18 (6 keypoints x 3)
  handRight: Float32Array;   // 18
  validity: number;
}

export interface JointStatePayload {
  timestamp: number;
  commanded: Float32Array;
  measured: Float32Array;
}

export interface SceneObjectPayload {
  id: number;
  shape: number; // 0 box, 1 cylinder
  dims: Float32Array;  // 3
  pose: Float32Array;  // 7
  rgba: Uint8Array;    // 4
  flags: number;
}

export interface SceneStatePayload {
  objects: SceneObjectPayload[];
}

export interface StereoFramePayload {
  width: number;
  height: number;
  encoding: number;
  left: Uint8Array;
  right: Uint8Array;
}

export type Decoded =
  | { kind: "hello"; data: Record<string, unknown> }
  | { kind: "control"; data: Record<string, unknown> }
  | { kind: "stats"; data: Record<string, unknown> }
  | { kind: "operator_frame"; frame: OperatorFramePayload }
  | { kind: "joint_state"; state: JointStatePayload }
  | { kind: "scene_state"; scene: SceneStatePayload }
  | { kind: "stereo_frame"; stereo: StereoFramePayload };

export function encodeJson(tag: number, data: Record<string, unknown>): Uint8Array {
  const body = new TextEncoder().encode(JSON.stringify(data));
  const out = new Uint8Array(1 + body.length);
  out[0] = tag;
  out.set(body, 1);
  return out;
}

export function encodeHello(role: "operator" | "viewer"): Uint8Array {
  return encodeJson(HELLO, { role, protocol_version: PROTOCOL_VERSION });
}

export function encodeControl(data: Record<string, unknown>): Uint8Array {
  return encodeJson(CONTROL, data);
}

export function encodeOperatorFrame(p: OperatorFramePayload): Uint8Array {
  const out = new Uint8Array(1 + 8 + 4 * (21 + 36) + 1);
  const view = new DataView(out.buffer);
  out[0] = OPERATOR_FRAME;
  view.setFloat64(1, p.timestamp, true);
  let off = 9;
  for (const arr of [p.head, p.wristLeft, p.wristRight, p.handLeft, p.handRight]) {
    for (let i = 0; i < arr.length; i++) {
      view.setFloat32(off, arr[i], true);
      off += 4;
    }
  }
  out[off] = p.validity & 0xff;
  return out;
}

function f32(view: DataView, off: number, n: number): Float32Array {
  const arr = new Float32Array(n);
  for (let i = 0; i < n; i++) arr[i] = view.getFloat32(off + 4 * i, true);
  return arr;
}

export function decodeMessage(buf: ArrayBuffer | Uint8Array): Decoded {
  const bytes = buf instanceof Uint8Array ? buf : new Uint8Array(buf);
  if (bytes.length < 1) throw new Error("empty message");
  const tag = bytes[0];
  const view = new DataView(bytes.buffer, bytes.byteOffset + 1, bytes.length - 1);
  if (tag === HELLO || tag === CONTROL || tag === STATS) {
    const text = new TextDecoder("utf-8", { fatal: true }).decode(
      bytes.subarray(1));
    const data = JSON.parse(text);
    const kind = tag === HELLO ? "hello" : tag === CONTROL ? "control" : "stats";
    return { kind, data } as Decoded;
  }
  if (tag === OPERATOR_FRAME) {
    const timestamp = view.getFloat64(0, true);
    return {
      kind: "operator_frame",
      frame: {
        timestamp,
        head: f32(view, 8, 7),
        wristLeft: f32(view, 36, 7),
        wristRight: f32(view, 64, 7),
        handLeft: f32(view, 92, 18),
        handRight: f32(view, 164, 18),
        validity: view.getUint8(236),
      },
    };
  }
  if (tag === JOINT_STATE) {
    const timestamp = view.getFloat64(0, true);
    const n = view.getUint16(8, true);
    return {
      kind: "joint_state",
      state: { timestamp, commanded: f32(view, 10, n), measured: f32(view, 10 + 4 * n, n) },
    };
  }
  if (tag === SCENE_STATE) {
    const count = view.getUint16(0, true);
    let off = 2;
    const objects: SceneObjectPayload[] = [];
    for (let i = 0; i < count; i++) {
      const id = view.getUint32(off, true);
      const shape = view.getUint8(off + 4);
      const dims = f32(view, off + 5, 3);
      const pose = f32(view, off + 17, 7);
      const rgba = bytes.subarray(1 + off + 45, 1 + off + 49);
      const flags = view.getUint8(off + 49);
      objects.push({ id, shape, dims, pose, rgba: new Uint8Array(rgba), flags });
      off += 50;
    }
    return { kind: "scene_state", scene: { objects } };
  }
  if (tag === STEREO_FRAME) {
    const width = view.getUint16(0, true);
    const height = view.getUint16(2, true);
    const encoding = view.getUint8(4);
    const n = width * height * 3;
    const left = bytes.subarray(1 + 5, 1 + 5 + n);
    const right = bytes.subarray(1 + 5 + n, 1 + 5 + 2 * n);
    return {
      kind: "stereo_frame",
      stereo: { width, height, encoding, left: new Uint8Array(left), right: new Uint8Array(right) },
    };
  }
  throw new Error(`unknown tag 0x${tag.toString(16)}`);
}
