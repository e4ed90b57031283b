"""Binary wire protocol: one type-tag byte, then a little-endian payload.

Tags: HELLO 0x01, OPERATOR_FRAME 0x02, JOINT_STATE 0x03, SCENE_STATE 0x04,
STEREO_FRAME 0x05, CONTROL 0x06, STATS 0x07. HELLO/CONTROL/STATS carry UTF-8
JSON; the rest are packed numerics (poses as 7 x f32: qw qx qy qz tx ty tz).
decode() is total: malformed input raises a CodecError subclass, never crashes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadUtf8, NonUnitQuaternion, TruncatedPayload, UnknownTag
from .opframe import HandKeypoints, OperatorFrame
from .se3 import Pose

HELLO = 0x01
OPERATOR_FRAME = 0x02
JOINT_STATE = 0x03
SCENE_STATE = 0x04
STEREO_FRAME = 0x05
CONTROL = 0x06
STATS = 0x07

PROTOCOL_VERSION = 1

VALID_HEAD = 0x01
VALID_WRIST_LEFT = 0x02
VALID_WRIST_RIGHT = 0x04
VALID_HAND_LEFT = 0x08
VALID_HAND_RIGHT = 0x10

SHAPE_CODES = {"box": 0, "cylinder": 1}
SHAPE_NAMES = {v: k for k, v in SHAPE_CODES.items()}

_OPERATOR_PAYLOAD = 8 + 4 * (7 * 3 + 18 * 2) + 1  # 237; +1 tag byte on the wire


def _f32(a, n) -> np.ndarray:
    out = np.asarray(a, dtype="<f4").reshape(n)
    return out


class _ArrayEq:
    """Dataclass equality that tolerates numpy fields."""

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        for k, v in self.__dict__.items():
            w = other.__dict__[k]
            if isinstance(v, np.ndarray):
                if not (isinstance(w, np.ndarray) and v.dtype == w.dtype
                        and np.array_equal(v, w)):
                    return False
            elif v != w:
                return False
        return True


@dataclass(eq=False)
class HelloMsg(_ArrayEq):
    data: dict


@dataclass(eq=False)
class ControlMsg(_ArrayEq):
    data: dict


@dataclass(eq=False)
class StatsMsg(_ArrayEq):
    data: dict


@dataclass(eq=False)
class OperatorFrameMsg(_ArrayEq):
    timestamp: float
    head: np.ndarray          # (7,) f32
    wrist_left: np.ndarray    # (7,) f32
    wrist_right: np.ndarray   # (7,) f32
    hand_left: np.ndarray     # (6, 3) f32
    hand_right: np.ndarray    # (6, 3) f32
    validity: int

    @staticmethod
    def from_operator_frame(frame: OperatorFrame) -> "OperatorFrameMsg":
        def pose7(p: Pose | None) -> np.ndarray:
            if p is None:
                return np.zeros(7, dtype="<f4")
            return np.concatenate([p.q, p.t]).astype("<f4")

        def hand(h: HandKeypoints | None) -> np.ndarray:
            if h is None:
                return np.zeros((6, 3), dtype="<f4")
            return h.as_array().astype("<f4")

        validity = ((VALID_HEAD if frame.head is not None else 0)
                    | (VALID_WRIST_LEFT if frame.wrist_left is not None else 0)
                    | (VALID_WRIST_RIGHT if frame.wrist_right is not None else 0)
                    | (VALID_HAND_LEFT if frame.hand_left is not None else 0)
                    | (VALID_HAND_RIGHT if frame.hand_right is not None else 0))
        return OperatorFrameMsg(frame.timestamp, pose7(frame.head),
                                pose7(frame.wrist_left), pose7(frame.wrist_right),
                                hand(frame.hand_left), hand(frame.hand_right), validity)

    def to_operator_frame(self) -> OperatorFrame:
        def pose(a: np.ndarray, bit: int) -> Pose | None:
            if not self.validity & bit:
                return None
            a = a.astype(float)
            return Pose.from_parts(a[:4], a[4:])

        def hand(a: np.ndarray, bit: int) -> HandKeypoints | None:
            if not self.validity & bit:
                return None
            return HandKeypoints.from_array(a.astype(float))

        return OperatorFrame(float(self.timestamp),
                             head=pose(self.head, VALID_HEAD),
                             wrist_left=pose(self.wrist_left, VALID_WRIST_LEFT),
                             wrist_right=pose(self.wrist_right, VALID_WRIST_RIGHT),
                             hand_left=hand(self.hand_left, VALID_HAND_LEFT),
                             hand_right=hand(self.hand_right, VALID_HAND_RIGHT))


@dataclass(eq=False)
class JointStateMsg(_ArrayEq):
    timestamp: float
    commanded: np.ndarray  # (n,) f32
    measured: np.ndarray   # (n,) f32


@dataclass(eq=False)
class SceneObjectState(_ArrayEq):
    id: int
    shape: int
    dims: np.ndarray   # (3,) f32
    pose: np.ndarray   # (7,) f32
    rgba: np.ndarray   # (4,) u8
    flags: int         # bit0 attached


@dataclass(eq=False)
class SceneStateMsg(_ArrayEq):
    objects: list

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return len(self.objects) == len(other.objects) and all(
            a == b for a, b in zip(self.objects, other.objects))


@dataclass(eq=False)
class StereoFrameMsg(_ArrayEq):
    width: int
    height: int
    encoding: int  # 0 = raw RGB8; left pixels then right
    left: bytes
    right: bytes


Message = (HelloMsg | ControlMsg | StatsMsg | OperatorFrameMsg | JointStateMsg
           | SceneStateMsg | StereoFrameMsg)

_JSON_TAGS = {HELLO: HelloMsg, CONTROL: ControlMsg, STATS: StatsMsg}
_TAG_OF_JSON = {HelloMsg: HELLO, ControlMsg: CONTROL, StatsMsg: STATS}


def encode_message(m: Message) -> bytes:
    """Serialize to the wire layout; inverse of decode_message."""
    kind = type(m)
    if kind in _TAG_OF_JSON:
        return bytes([_TAG_OF_JSON[kind]]) + json.dumps(
            m.data, separators=(",", ":"), sort_keys=True).encode("utf-8")
    if kind is OperatorFrameMsg:
        return (bytes([OPERATOR_FRAME])
                + struct.pack("<d", m.timestamp)
                + _f32(m.head, 7).tobytes()
                + _f32(m.wrist_left, 7).tobytes()
                + _f32(m.wrist_right, 7).tobytes()
                + _f32(m.hand_left, (6, 3)).tobytes()
                + _f32(m.hand_right, (6, 3)).tobytes()
                + bytes([m.validity & 0xFF]))
    if kind is JointStateMsg:
        n = len(m.commanded)
        if len(m.measured) != n:
            raise ValueError("commanded/measured length mismatch")
        return (bytes([JOINT_STATE]) + struct.pack("<dH", m.timestamp, n)
                + _f32(m.commanded, n).tobytes() + _f32(m.measured, n).tobytes())
    if kind is SceneStateMsg:
        out = [bytes([SCENE_STATE]), struct.pack("<H", len(m.objects))]
        for o in m.objects:
            out.append(struct.pack("<IB", o.id, o.shape))
            out.append(_f32(o.dims, 3).tobytes())
            out.append(_f32(o.pose, 7).tobytes())
            out.append(np.asarray(o.rgba, dtype=np.uint8).reshape(4).tobytes())
            out.append(bytes([o.flags & 0xFF]))
        return b"".join(out)
    if kind is StereoFrameMsg:
        expected = m.width * m.height * 3
        if len(m.left) != expected or len(m.right) != expected:
            raise ValueError("image byte count does not match resolution")
        return (bytes([STEREO_FRAME]) + struct.pack("<HHB", m.width, m.height, m.encoding)
                + m.left + m.right)
    raise TypeError(f"not a protocol message: {m!r}")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise TruncatedPayload(
                f"needed {n} bytes at offset {self.off}, have {len(self.buf) - self.off}")
        out = self.buf[self.off: self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f32(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(4 * n), dtype="<f4").reshape(shape).copy()

    def done(self) -> None:
        if self.off != len(self.buf):
            raise TruncatedPayload(f"{len(self.buf) - self.off} trailing bytes")


def _check_quaternions(msg: OperatorFrameMsg) -> None:
    for a, bit, name in ((msg.head, VALID_HEAD, "head"),
                         (msg.wrist_left, VALID_WRIST_LEFT, "left wrist"),
                         (msg.wrist_right, VALID_WRIST_RIGHT, "right wrist")):
        if msg.validity & bit:
            norm = float(np.linalg.norm(a[:4].astype(float)))
            if abs(norm - 1.0) > 1e-3:
                raise NonUnitQuaternion(f"{name} quaternion norm {norm:.6f}")


def decode_message(buf: bytes) -> Message:
    """Parse one message; raises a CodecError subclass on any malformed input."""
    if len(buf) < 1:
        raise TruncatedPayload("empty message")
    tag = buf[0]
    body = buf[1:]
    if tag in _JSON_TAGS:
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as e:
            raise BadUtf8(str(e)) from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise BadUtf8(f"invalid JSON: {e}") from None
        if not isinstance(data, dict):
            raise BadUtf8("JSON payload must be an object")
        return _JSON_TAGS[tag](data)
    if tag == OPERATOR_FRAME:
        r = _Reader(body)
        (timestamp,) = r.unpack("<d")
        head = r.f32(7)
        wl = r.f32(7)
        wr = r.f32(7)
        hl = r.f32((6, 3))
        hr = r.f32((6, 3))
        (validity,) = r.unpack("<B")
        r.done()
        msg = OperatorFrameMsg(timestamp, head, wl, wr, hl, hr, validity)
        _check_quaternions(msg)
        return msg
    if tag == JOINT_STATE:
        r = _Reader(body)
        timestamp, n = r.unpack("<dH")
        commanded = r.f32(n)
        measured = r.f32(n)
        r.done()
        return JointStateMsg(timestamp, commanded, measured)
    if tag == SCENE_STATE:
        r = _Reader(body)
        (count,) = r.unpack("<H")
        objects = []
        for _ in range(count):
            oid, shape = r.unpack("<IB")
            dims = r.f32(3)
            pose = r.f32(7)
            rgba = np.frombuffer(r.take(4), dtype=np.uint8).copy()
            (flags,) = r.unpack("<B")
            objects.append(SceneObjectState(oid, shape, dims, pose, rgba, flags))
        r.done()
        return SceneStateMsg(objects)
    if tag == STEREO_FRAME:
        r = _Reader(body)
        width, height, encoding = r.unpack("<HHB")
        n = width * height * 3
        left = r.take(n)
        right = r.take(n)
        r.done()
        return StereoFrameMsg(width, height, encoding, left, right)
    raise UnknownTag(f"tag 0x{tag:02x}")
