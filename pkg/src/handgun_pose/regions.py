"""Square hand-region candidates derived from forearm geometry.

Each hand box is centred past the wrist along the elbow->wrist direction and
sized proportionally to the forearm length, so it follows apparent body scale::

    center = wrist + extension_k * (wrist - elbow)
    side   = scale_s * |wrist - elbow|

When the two hand boxes of a person overlap (a two-handed grip) they are merged
into their union box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator, TransformerMixin

from .geometry import (L_ELBOW, L_WRIST, R_ELBOW, R_WRIST, BBox, Keypoint2D, Skeleton, intersect,
                       iou, union_box)

RIGHT, LEFT, MERGED = "right", "left", "merged"


@dataclass(frozen=True)
class RegionParams:
    conf_threshold: float = 0.3
    extension_k: float = 0.5
    scale_s: float = 1.5
    merge_iou: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError(f"conf_threshold must lie in [0, 1], got {self.conf_threshold}")
        if not self.scale_s > 0:
            raise ValueError(f"scale_s must be positive, got {self.scale_s}")
        if not 0.0 < self.merge_iou <= 1.0:
            raise ValueError(f"merge_iou must lie in (0, 1], got {self.merge_iou}")
        if not math.isfinite(self.extension_k):
            raise ValueError("extension_k must be finite")


@dataclass(frozen=True)
class HandRegion:
    """A candidate box around one hand, or around both hands when merged.

    ``center`` and ``side_length`` describe the square before merging and
    clipping; ``wrist_index`` is the BODY_25 index of ``anchor_wrist``.
    """

    box: BBox
    person_id: int
    side: str
    anchor_wrist: Keypoint2D
    wrist_index: int
    center: Tuple[float, float] = (0.0, 0.0)
    side_length: float = 0.0


def hand_box_from_forearm(elbow: Keypoint2D, wrist: Keypoint2D, params: RegionParams = RegionParams(),
                          *, side: str = RIGHT, person_id: int = 0,
                          wrist_index: int = R_WRIST) -> Optional[HandRegion]:
    if elbow.confidence < params.conf_threshold or wrist.confidence < params.conf_threshold:
        return None
    dx = wrist.x - elbow.x
    dy = wrist.y - elbow.y
    length = math.hypot(dx, dy)
    if length == 0.0:
        return None
    cx = wrist.x + params.extension_k * dx
    cy = wrist.y + params.extension_k * dy
    half = 0.5 * params.scale_s * length
    box = BBox(cx - half, cy - half, cx + half, cy + half)
    return HandRegion(box, person_id, side, wrist, wrist_index, (cx, cy), 2.0 * half)


def extract_hand_regions(skeleton: Skeleton, params: RegionParams = RegionParams()) -> List[HandRegion]:
    """Right and left hand regions of one person, merged if they overlap enough."""
    right = hand_box_from_forearm(skeleton[R_ELBOW], skeleton[R_WRIST], params, side=RIGHT,
                                  person_id=skeleton.person_id, wrist_index=R_WRIST)
    left = hand_box_from_forearm(skeleton[L_ELBOW], skeleton[L_WRIST], params, side=LEFT,
                                 person_id=skeleton.person_id, wrist_index=L_WRIST)
    if right is not None and left is not None and iou(right.box, left.box) >= params.merge_iou:
        # ties keep the right wrist as anchor
        anchor = left if left.anchor_wrist.confidence > right.anchor_wrist.confidence else right
        return [HandRegion(union_box(right.box, left.box), skeleton.person_id, MERGED,
                           anchor.anchor_wrist, anchor.wrist_index, anchor.center, anchor.side_length)]
    return [r for r in (right, left) if r is not None]


def clip_to_image(region: HandRegion, width: float, height: float) -> Optional[HandRegion]:
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {width}x{height}")
    clipped = intersect(region.box, BBox(0.0, 0.0, float(width), float(height)))
    if clipped is None:
        return None
    if clipped == region.box:
        return region
    return HandRegion(clipped, region.person_id, region.side, region.anchor_wrist,
                      region.wrist_index, region.center, region.side_length)


def image_regions(skeletons: Sequence[Skeleton], params: RegionParams,
                  width: Optional[float] = None, height: Optional[float] = None) -> List[HandRegion]:
    """All regions of an image, clipped after merging when the size is known."""
    out = []
    for sk in skeletons:
        for region in extract_hand_regions(sk, params):
            if width is not None:
                region = clip_to_image(region, width, height)
                if region is None:
                    continue
            out.append(region)
    return out


class HandRegionExtractor(TransformerMixin, BaseEstimator):
    """Turn per-image skeleton lists into per-image hand-region lists.

    Stateless: ``fit`` only validates parameters.

    >>> from handgun_pose.geometry import Keypoint2D, Skeleton
    >>> kps = [Keypoint2D.undefined()] * 25
    >>> HandRegionExtractor().fit_transform([[Skeleton(tuple(kps))]])
    [[]]
    """

    def __init__(self, conf_threshold=0.3, extension_k=0.5, scale_s=1.5, merge_iou=0.4):
        self.conf_threshold = conf_threshold
        self.extension_k = extension_k
        self.scale_s = scale_s
        self.merge_iou = merge_iou

    def region_params(self) -> RegionParams:
        return RegionParams(self.conf_threshold, self.extension_k, self.scale_s, self.merge_iou)

    def fit(self, X=None, y=None):
        self.params_ = self.region_params()
        return self

    def transform(self, X, image_sizes=None):
        params = getattr(self, "params_", None) or self.region_params()
        if image_sizes is None:
            image_sizes = [(None, None)] * len(X)
        return [image_regions(sks, params, w, h) for sks, (w, h) in zip(X, image_sizes)]
