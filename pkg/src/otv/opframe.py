"""Operator-side data: hand keypoint sets and timestamped tracking frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .se3 import Pose

KEYPOINT_NAMES = ("wrist", "thumb_tip", "index_tip", "middle_tip", "ring_tip", "pinky_tip")

# keypoints further apart than this cannot come from one human hand
MAX_HAND_SPAN_M = 0.4


@dataclass(frozen=True)
class HandKeypoints:
    """Six named keypoints in the operator world frame, meters."""

    wrist: np.ndarray
    thumb_tip: np.ndarray
    index_tip: np.ndarray
    middle_tip: np.ndarray
    ring_tip: np.ndarray
    pinky_tip: np.ndarray

    def point(self, name: str) -> np.ndarray:
        try:
            return getattr(self, name)
        except AttributeError:
            raise KeyError(name) from None

    def as_array(self) -> np.ndarray:
        """(6, 3) array in KEYPOINT_NAMES order."""
        return np.stack([getattr(self, n) for n in KEYPOINT_NAMES])

    @staticmethod
    def from_array(a: np.ndarray) -> "HandKeypoints":
        a = np.asarray(a, dtype=float)
        if a.shape != (6, 3):
            raise ValueError(f"keypoint array must be (6, 3), got {a.shape}")
        return HandKeypoints(*(a[i].copy() for i in range(6)))

    def is_sane(self) -> bool:
        a = self.as_array()
        if not np.all(np.isfinite(a)):
            return False
        diffs = a[:, None, :] - a[None, :, :]
        return bool(np.max(np.linalg.norm(diffs, axis=-1)) < MAX_HAND_SPAN_M)


@dataclass(frozen=True)
class OperatorFrame:
    """One tracking sample; invalid components are None (never zero-filled)."""

    timestamp: float
    head: Pose | None = None
    wrist_left: Pose | None = None
    wrist_right: Pose | None = None
    hand_left: HandKeypoints | None = None
    hand_right: HandKeypoints | None = None

    def wrist(self, side: str) -> Pose | None:
        return self.wrist_left if side == "left" else self.wrist_right

    def hand(self, side: str) -> HandKeypoints | None:
        return self.hand_left if side == "left" else self.hand_right

    @property
    def complete(self) -> bool:
        return all(x is not None for x in
                   (self.head, self.wrist_left, self.wrist_right,
                    self.hand_left, self.hand_right))
