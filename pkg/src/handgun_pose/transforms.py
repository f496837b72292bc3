"""Image/annotation transforms used to build the flip, dark and far test sets.

Images are ``(H, W, 3)`` uint8 arrays in OpenCV's BGR channel order. Each
transform maps the image, its ground-truth boxes and its skeletons together.
"""
from __future__ import annotations

from typing import List, Sequence, Tuple

import cv2
import numpy as np

from .exceptions import ParameterError
from .geometry import BODY25_MIRROR_PAIRS, NUM_KEYPOINTS, BBox, GroundTruthBox, Keypoint2D, Skeleton

DEFAULT_VALUE_SCALE = 0.3

_MIRROR = list(range(NUM_KEYPOINTS))
for _r, _l in BODY25_MIRROR_PAIRS:
    _MIRROR[_r], _MIRROR[_l] = _l, _r


def flip_box(box: BBox, width: float) -> BBox:
    return BBox(width - box.x_max, box.y_min, width - box.x_min, box.y_max)


def flip_skeleton(sk: Skeleton, width: float) -> Skeleton:
    """Mirror x and swap left/right keypoint identities; undefined points stay (0, 0, 0)."""
    kps = []
    for src in _MIRROR:
        kp = sk.keypoints[src]
        kps.append(Keypoint2D(width - kp.x, kp.y, kp.confidence) if kp.defined else kp)
    return Skeleton(tuple(kps), sk.person_id)


def hflip(image: np.ndarray, gts: Sequence[GroundTruthBox],
          skeletons: Sequence[Skeleton]) -> Tuple[np.ndarray, List[GroundTruthBox], List[Skeleton]]:
    width = image.shape[1]
    return (
        np.ascontiguousarray(image[:, ::-1]),
        [GroundTruthBox(flip_box(g.box, width), g.image_id) for g in gts],
        [flip_skeleton(s, width) for s in skeletons],
    )


def darken(image: np.ndarray, value_scale: float = DEFAULT_VALUE_SCALE) -> np.ndarray:
    """Scale the HSV value channel, leaving hue and saturation alone."""
    if not 0.0 < value_scale <= 1.0:
        raise ParameterError(f"value_scale must lie in (0, 1], got {value_scale}")
    hsv = cv2.cvtColor(image.astype(np.float32) / 255.0, cv2.COLOR_BGR2HSV)
    hsv[..., 2] *= value_scale
    bgr = cv2.cvtColor(hsv, cv2.COLOR_HSV2BGR) * 255.0
    return np.clip(np.rint(bgr), 0, 255).astype(np.uint8)


def downscale_half(image: np.ndarray) -> np.ndarray:
    """2x2 block average; an odd trailing row/column is dropped."""
    h, w = image.shape[0] // 2, image.shape[1] // 2
    blocks = image[:2 * h, :2 * w].astype(np.float64)
    blocks = blocks.reshape(h, 2, w, 2, *image.shape[2:]).mean(axis=(1, 3))
    return np.rint(blocks).astype(image.dtype)


def _scale_skeleton(sk: Skeleton, factor: float, dx: float = 0.0, dy: float = 0.0) -> Skeleton:
    kps = tuple(Keypoint2D(k.x * factor + dx, k.y * factor + dy, k.confidence) if k.defined else k
                for k in sk.keypoints)
    return Skeleton(kps, sk.person_id)


def far_transform(image: np.ndarray, gts: Sequence[GroundTruthBox], skeletons: Sequence[Skeleton],
                  center: bool = False) -> Tuple[np.ndarray, List[GroundTruthBox], List[Skeleton]]:
    """Half-size content on a black canvas of the original size.

    Content goes to the top-left corner unless ``center`` is set, in which case
    it is offset by a whole number of pixels.
    """
    small = downscale_half(image)
    out = np.zeros_like(image)
    ox = (image.shape[1] - small.shape[1]) // 2 if center else 0
    oy = (image.shape[0] - small.shape[0]) // 2 if center else 0
    out[oy:oy + small.shape[0], ox:ox + small.shape[1]] = small

    def scale_box(b: BBox) -> BBox:
        return BBox(b.x_min * 0.5 + ox, b.y_min * 0.5 + oy, b.x_max * 0.5 + ox, b.y_max * 0.5 + oy)

    return (
        out,
        [GroundTruthBox(scale_box(g.box), g.image_id) for g in gts],
        [_scale_skeleton(s, 0.5, ox, oy) for s in skeletons],
    )
