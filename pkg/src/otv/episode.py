"""Episode recording and loading.

Directory layout:
    meta.json   - robot name, action_dim, rate_hz, num_steps, task, created
    steps.bin   - magic 'OTVE', u16 version, u16 flags, then fixed-length
                  little-endian records (layout below)
    frames/NNNNNN_left.ppm / NNNNNN_right.ppm - binary P6, when enabled

Record layout: u32 tick, f64 time_s, n*f32 observed, n*f32 commanded, then
(flag bit 0) an operator block of head/left wrist/right wrist poses as 7*f32
each, two 6x3 f32 keypoint sets, and a u8 validity mask, then (flag bit 1) a
u32 stereo frame index (0xFFFFFFFF on ticks without a render). Everything
needed to reload lives in the directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptEpisode

MAGIC = b"OTVE"
VERSION = 1

FLAG_OPERATOR = 0x0001
FLAG_FRAMES = 0x0002

NO_FRAME = 0xFFFFFFFF  # frame_index sentinel for ticks without a render


def record_dtype(action_dim: int, flags: int) -> np.dtype:
    fields = [
        ("tick", "<u4"),
        ("time_s", "<f8"),
        ("q_observed", "<f4", (action_dim,)),
        ("q_commanded", "<f4", (action_dim,)),
    ]
    if flags & FLAG_OPERATOR:
        fields += [
            ("head", "<f4", (7,)),
            ("wrist_left", "<f4", (7,)),
            ("wrist_right", "<f4", (7,)),
            ("hand_left", "<f4", (6, 3)),
            ("hand_right", "<f4", (6, 3)),
            ("validity", "u1"),
        ]
    if flags & FLAG_FRAMES:
        fields += [("frame_index", "<u4")]
    return np.dtype(fields)


@dataclass
class EpisodeMeta:
    robot: str
    action_dim: int
    rate_hz: float
    num_steps: int
    task: str
    created: float
    flags: int

    def to_json(self) -> dict:
        return {
            "robot": self.robot,
            "action_dim": self.action_dim,
            "rate_hz": self.rate_hz,
            "num_steps": self.num_steps,
            "task": self.task,
            "created": self.created,
            "operator_block": bool(self.flags & FLAG_OPERATOR),
            "frame_indices": bool(self.flags & FLAG_FRAMES),
        }

    @staticmethod
    def from_json(d: dict) -> "EpisodeMeta":
        flags = (FLAG_OPERATOR if d.get("operator_block") else 0) | \
                (FLAG_FRAMES if d.get("frame_indices") else 0)
        return EpisodeMeta(d["robot"], int(d["action_dim"]), float(d["rate_hz"]),
                           int(d["num_steps"]), d.get("task", ""), float(d["created"]),
                           flags)


class EpisodeWriter:
    """Streams records to steps.bin; finalize() writes meta.json."""

    def __init__(self, directory, robot: str, action_dim: int,
                 rate_hz: float = 60.0, task: str = "",
                 operator_block: bool = True, frames: bool = False,
                 created: float = 0.0):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.flags = (FLAG_OPERATOR if operator_block else 0) | (FLAG_FRAMES if frames else 0)
        self.meta = EpisodeMeta(robot, action_dim, rate_hz, 0, task, created, self.flags)
        self.dtype = record_dtype(action_dim, self.flags)
        self._f = open(self.dir / "steps.bin", "wb")
        self._f.write(MAGIC)
        self._f.write(np.array([VERSION, self.flags], dtype="<u2").tobytes())
        self._steps = 0
        if frames:
            (self.dir / "frames").mkdir(exist_ok=True)

    def record_step(self, tick: int, time_s: float,
                    q_observed: np.ndarray, q_commanded: np.ndarray,
                    operator: dict | None = None,
                    frame_index: int | None = None) -> None:
        rec = np.zeros(1, dtype=self.dtype)
        rec["tick"] = tick
        rec["time_s"] = time_s
        rec["q_observed"] = np.asarray(q_observed, dtype=np.float32)
        rec["q_commanded"] = np.asarray(q_commanded, dtype=np.float32)
        if self.flags & FLAG_OPERATOR:
            op = operator or {}
            for key in ("head", "wrist_left", "wrist_right", "hand_left", "hand_right"):
                if key in op and op[key] is not None:
                    rec[key] = np.asarray(op[key], dtype=np.float32)
            rec["validity"] = op.get("validity", 0)
        if self.flags & FLAG_FRAMES:
            rec["frame_index"] = NO_FRAME if frame_index is None else frame_index
        self._f.write(rec.tobytes())
        self._steps += 1

    def write_stereo_ppm(self, tick: int, left: np.ndarray, right: np.ndarray) -> None:
        for tag, img in (("left", left), ("right", right)):
            path = self.dir / "frames" / f"{tick:06d}_{tag}.ppm"
            h, w = img.shape[:2]
            with open(path, "wb") as f:
                f.write(b"P6\n%d %d\n255\n" % (w, h))
                f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())

    def finalize(self) -> EpisodeMeta:
        self._f.close()
        self.meta.num_steps = self._steps
        with open(self.dir / "meta.json", "w") as f:
            json.dump(self.meta.to_json(), f, indent=1, sort_keys=True)
            f.write("\n")
        return self.meta


@dataclass
class Episode:
    meta: EpisodeMeta
    records: np.ndarray  # structured array, record_dtype(meta.action_dim, meta.flags)
    directory: Path

    @property
    def commands(self) -> np.ndarray:
        return self.records["q_commanded"].astype(np.float64)

    @property
    def observed(self) -> np.ndarray:
        return self.records["q_observed"].astype(np.float64)

    def frame_paths(self, tick: int) -> tuple[Path, Path]:
        return (self.directory / "frames" / f"{tick:06d}_left.ppm",
                self.directory / "frames" / f"{tick:06d}_right.ppm")


def load_episode(directory) -> Episode:
    """Reads and validates an episode directory; round-trips exactly."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    steps_path = directory / "steps.bin"
    if not meta_path.exists() or not steps_path.exists():
        raise CorruptEpisode(f"{directory} lacks meta.json or steps.bin")
    try:
        meta = EpisodeMeta.from_json(json.loads(meta_path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CorruptEpisode(f"bad meta.json: {e}") from None
    raw = steps_path.read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise CorruptEpisode("bad magic")
    version, flags = np.frombuffer(raw[4:8], dtype="<u2")
    if version != VERSION:
        raise CorruptEpisode(f"unsupported version {version}")
    if flags != meta.flags:
        raise CorruptEpisode("flags disagree between meta.json and steps.bin")
    dtype = record_dtype(meta.action_dim, int(flags))
    body = raw[8:]
    if len(body) % dtype.itemsize != 0:
        raise CorruptEpisode(
            f"truncated record: {len(body)} bytes is not a multiple of {dtype.itemsize}")
    records = np.frombuffer(body, dtype=dtype)
    if len(records) != meta.num_steps:
        raise CorruptEpisode(
            f"meta says {meta.num_steps} steps, file holds {len(records)}")
    return Episode(meta, records, directory)
