"""Keypoint, skeleton and box value types plus the overlap primitives.

Boxes are continuous corner coordinates ``(x_min, y_min, x_max, y_max)`` in
pixels. Overlaps are computed on real-valued areas, never on pixel sets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidGeometryError

NUM_KEYPOINTS = 25

# BODY_25 indices used across the package.
NOSE = 0
NECK = 1
R_SHOULDER, R_ELBOW, R_WRIST = 2, 3, 4
L_SHOULDER, L_ELBOW, L_WRIST = 5, 6, 7
MID_HIP = 8

BODY25_NAMES = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist", "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
    "REye", "LEye", "REar", "LEar", "LBigToe", "LSmallToe", "LHeel",
    "RBigToe", "RSmallToe", "RHeel",
)

# Right/left counterparts, swapped by a horizontal mirror.
BODY25_MIRROR_PAIRS = (
    (2, 5), (3, 6), (4, 7), (9, 12), (10, 13), (11, 14),
    (15, 16), (17, 18), (19, 22), (20, 23), (21, 24),
)


@dataclass(frozen=True)
class Keypoint2D:
    x: float
    y: float
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def defined(self) -> bool:
        return self.confidence > 0.0

    @classmethod
    def undefined(cls) -> "Keypoint2D":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Skeleton:
    """One person's 25 BODY_25 keypoints."""

    keypoints: Tuple[Keypoint2D, ...]
    person_id: int = 0

    def __post_init__(self):
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise ValueError(
                f"a skeleton needs exactly {NUM_KEYPOINTS} keypoints, got {len(self.keypoints)}"
            )
        object.__setattr__(self, "keypoints", tuple(self.keypoints))

    def __getitem__(self, index: int) -> Keypoint2D:
        return self.keypoints[index]

    def to_array(self) -> np.ndarray:
        """Return a ``(25, 3)`` float array of ``(x, y, confidence)`` rows."""
        return np.array([(k.x, k.y, k.confidence) for k in self.keypoints], dtype=np.float64)

    @classmethod
    def from_array(cls, arr, person_id: int = 0) -> "Skeleton":
        arr = np.asarray(arr, dtype=np.float64).reshape(NUM_KEYPOINTS, 3)
        return cls(tuple(Keypoint2D(float(x), float(y), float(c)) for x, y, c in arr), person_id)


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidGeometryError(
                f"box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}) has no positive area"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def contains(self, other: "BBox") -> bool:
        return (self.x_min <= other.x_min and self.y_min <= other.y_min
                and other.x_max <= self.x_max and other.y_max <= self.y_max)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "BBox":
        if len(values) != 4:
            raise InvalidGeometryError(f"a box needs 4 coordinates, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruthBox:
    box: BBox
    image_id: str = ""


def area(b: BBox) -> float:
    """Area of a valid box in square pixels."""
    w = b.x_max - b.x_min
    h = b.y_max - b.y_min
    if w <= 0 or h <= 0:
        raise InvalidGeometryError(f"degenerate box {b.as_tuple()}")
    return w * h


def intersect(a: BBox, b: BBox) -> Optional[BBox]:
    """Overlap rectangle of two boxes, or ``None`` when the interiors are disjoint."""
    x_min = max(a.x_min, b.x_min)
    y_min = max(a.y_min, b.y_min)
    x_max = min(a.x_max, b.x_max)
    y_max = min(a.y_max, b.y_max)
    if x_min >= x_max or y_min >= y_max:
        return None
    return BBox(x_min, y_min, x_max, y_max)


def _inter_area(a: BBox, b: BBox) -> float:
    inter = intersect(a, b)
    return 0.0 if inter is None else area(inter)


def iou(a: BBox, b: BBox) -> float:
    inter = _inter_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (area(a) + area(b) - inter)


def iomin(a: BBox, b: BBox) -> float:
    """Intersection over the smaller of the two areas.

    Unlike IoU this does not penalise a small box lying inside a large one,
    which is the usual situation for a gun annotation inside a hand region.
    """
    inter = _inter_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / min(area(a), area(b))


def union_box(a: BBox, b: BBox) -> BBox:
    return BBox(min(a.x_min, b.x_min), min(a.y_min, b.y_min),
                max(a.x_max, b.x_max), max(a.y_max, b.y_max))
