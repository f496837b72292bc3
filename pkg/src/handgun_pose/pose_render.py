"""Skeleton normalization and binary pose canvases.

A skeleton is expressed relative to its neck and scaled by the neck-to-midhip
distance, then drawn on a 512x512 binary canvas with the neck at the centre.
The canvas is split into two 256-wide halves; each hand region is paired with
the half its anchoring wrist falls in.

Arrays follow image convention: ``canvas[row, col]`` with ``col`` the x axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegenerateSkeletonError, HalfSelectionError, NormalizationError
from .geometry import MID_HIP, NECK, NUM_KEYPOINTS, Skeleton

CANVAS_SIZE = 512
HALF_WIDTH = CANVAS_SIZE // 2
CANVAS_CENTER = (256.0, 256.0)

PX_PER_UNIT = 80.0
LIMB_THICKNESS = 4.0
POINT_RADIUS = 4.0

# The 24 drawn BODY_25 limbs (ear-shoulder links are not part of the skeleton).
BODY25_LIMBS = (
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9),
    (9, 10), (10, 11), (8, 12), (12, 13), (13, 14), (1, 0), (0, 15), (15, 17),
    (0, 16), (16, 18), (14, 19), (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
)

LEFT_HALF, RIGHT_HALF = "left", "right"


@dataclass(frozen=True)
class NormalizedSkeleton:
    """``coords`` is (25, 2) in neck-relative units; ``confidence`` is (25,).

    Undefined keypoints keep confidence 0 and coordinates (0, 0).
    """

    coords: np.ndarray
    confidence: np.ndarray
    person_id: int = 0

    def defined(self, index: int) -> bool:
        return bool(self.confidence[index] > 0)


@dataclass(frozen=True)
class PoseHalf:
    pixels: np.ndarray  # (512, 256) uint8 in {0, 1}
    side: str


def normalize_skeleton(s: Skeleton) -> NormalizedSkeleton:
    arr = s.to_array()
    neck, hip = arr[NECK], arr[MID_HIP]
    if neck[2] <= 0 or hip[2] <= 0:
        raise NormalizationError(
            f"person {s.person_id}: normalization needs both Neck and MidHip"
        )
    scale = math.hypot(hip[0] - neck[0], hip[1] - neck[1])
    if scale == 0.0:
        raise DegenerateSkeletonError(f"person {s.person_id}: Neck and MidHip coincide")
    conf = arr[:, 2].copy()
    coords = (arr[:, :2] - neck[:2]) / scale
    coords[conf <= 0] = 0.0
    coords.setflags(write=False)
    conf.setflags(write=False)
    return NormalizedSkeleton(coords, conf, s.person_id)


def to_canvas(kx, ky, px_per_unit: float = PX_PER_UNIT) -> Tuple[float, float]:
    return CANVAS_CENTER[0] + px_per_unit * kx, CANVAS_CENTER[1] + px_per_unit * ky


def _pixel_grid():
    rows, cols = np.mgrid[0:CANVAS_SIZE, 0:CANVAS_SIZE]
    return cols.astype(np.float64), rows.astype(np.float64)


_GRID = _pixel_grid()


def _draw_disc(canvas, cx, cy, radius):
    x0, x1 = max(int(math.floor(cx - radius)), 0), min(int(math.ceil(cx + radius)), CANVAS_SIZE - 1)
    y0, y1 = max(int(math.floor(cy - radius)), 0), min(int(math.ceil(cy + radius)), CANVAS_SIZE - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = _GRID[0][y0:y1 + 1, x0:x1 + 1]
    ys = _GRID[1][y0:y1 + 1, x0:x1 + 1]
    canvas[y0:y1 + 1, x0:x1 + 1] |= ((xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius)


def _draw_segment(canvas, ax, ay, bx, by, thickness):
    r = thickness / 2.0
    x0 = max(int(math.floor(min(ax, bx) - r)), 0)
    x1 = min(int(math.ceil(max(ax, bx) + r)), CANVAS_SIZE - 1)
    y0 = max(int(math.floor(min(ay, by) - r)), 0)
    y1 = min(int(math.ceil(max(ay, by) + r)), CANVAS_SIZE - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = _GRID[0][y0:y1 + 1, x0:x1 + 1]
    ys = _GRID[1][y0:y1 + 1, x0:x1 + 1]
    dx, dy = bx - ax, by - ay
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        t = np.zeros_like(xs)
    else:
        t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / len2, 0.0, 1.0)
    px, py = ax + t * dx, ay + t * dy
    canvas[y0:y1 + 1, x0:x1 + 1] |= ((xs - px) ** 2 + (ys - py) ** 2 <= r * r)


def render_canvas(ns: NormalizedSkeleton, px_per_unit: float = PX_PER_UNIT,
                  limb_thickness: float = LIMB_THICKNESS,
                  point_radius: float = POINT_RADIUS) -> np.ndarray:
    """Rasterize a normalized skeleton to a (512, 512) uint8 array of 0/1.

    A pixel is set when its centre lies within ``point_radius`` of a defined
    keypoint or within ``limb_thickness / 2`` of a limb between two defined
    keypoints. Geometry outside the canvas is clipped.
    """
    if not px_per_unit > 0:
        raise ValueError(f"px_per_unit must be positive, got {px_per_unit}")
    canvas = np.zeros((CANVAS_SIZE, CANVAS_SIZE), dtype=bool)
    pts = [to_canvas(x, y, px_per_unit) for x, y in ns.coords]
    if limb_thickness > 0:
        for a, b in BODY25_LIMBS:
            if ns.defined(a) and ns.defined(b):
                _draw_segment(canvas, *pts[a], *pts[b], limb_thickness)
    if point_radius >= 0:
        for n in range(NUM_KEYPOINTS):
            if ns.defined(n):
                _draw_disc(canvas, *pts[n], point_radius)
    return canvas.astype(np.uint8)


def split_canvas(c: np.ndarray) -> Tuple[PoseHalf, PoseHalf]:
    if c.shape != (CANVAS_SIZE, CANVAS_SIZE):
        raise ValueError(f"canvas must be {CANVAS_SIZE}x{CANVAS_SIZE}, got {c.shape}")
    return PoseHalf(c[:, :HALF_WIDTH].copy(), LEFT_HALF), PoseHalf(c[:, HALF_WIDTH:].copy(), RIGHT_HALF)


def half_side_for(region, ns: NormalizedSkeleton, px_per_unit: float = PX_PER_UNIT) -> str:
    idx = region.wrist_index
    if not ns.defined(idx):
        raise HalfSelectionError(
            f"person {ns.person_id}: anchor wrist {idx} is undefined in the skeleton"
        )
    x, _ = to_canvas(ns.coords[idx, 0], ns.coords[idx, 1], px_per_unit)
    return LEFT_HALF if x < HALF_WIDTH else RIGHT_HALF


def select_half(region, ns: NormalizedSkeleton, c: np.ndarray,
                px_per_unit: float = PX_PER_UNIT) -> PoseHalf:
    """The canvas half containing the region's anchor wrist (ties go right)."""
    left, right = split_canvas(c)
    return left if half_side_for(region, ns, px_per_unit) == LEFT_HALF else right


def save_bitmap(pixels: np.ndarray, path) -> None:
    """Write a binary raster as a lossless 1-bit PNG."""
    Image.fromarray((np.asarray(pixels) > 0).astype(np.uint8) * 255).convert("1").save(Path(path))


def load_bitmap(path) -> np.ndarray:
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) > 0).astype(np.uint8)


class PoseHalfRenderer(TransformerMixin, BaseEstimator):
    """Map ``(skeleton, hand_region)`` pairs to (512, 256) pose halves.

    Skeletons that cannot be normalized yield ``None`` unless ``fallback`` is
    set, in which case an all-zero half is returned.
    """

    def __init__(self, px_per_unit=PX_PER_UNIT, limb_thickness=LIMB_THICKNESS,
                 point_radius=POINT_RADIUS, fallback=False):
        self.px_per_unit = px_per_unit
        self.limb_thickness = limb_thickness
        self.point_radius = point_radius
        self.fallback = fallback

    def fit(self, X=None, y=None):
        return self

    def render(self, skeleton: Skeleton) -> Tuple[NormalizedSkeleton, np.ndarray]:
        ns = normalize_skeleton(skeleton)
        return ns, render_canvas(ns, self.px_per_unit, self.limb_thickness, self.point_radius)

    def transform_one(self, skeleton: Skeleton, region) -> Optional[np.ndarray]:
        try:
            ns, canvas = self.render(skeleton)
            return select_half(region, ns, canvas, self.px_per_unit).pixels
        except (NormalizationError, HalfSelectionError):
            if self.fallback:
                return np.zeros((CANVAS_SIZE, HALF_WIDTH), dtype=np.uint8)
            return None

    def transform(self, X):
        return [self.transform_one(sk, region) for sk, region in X]
