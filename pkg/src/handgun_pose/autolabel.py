"""Build the labelled hand-region dataset used to train the region classifier.

Every hand region of every person is cropped, resized to 256x256 and labelled
``handgun`` when it overlaps some ground-truth box with IoMin >= 0.5.

On disk a dataset is a directory holding ``crops/``, ``poses/`` (optional),
``index.csv`` and ``meta.json``. All paths in the index are relative to the
dataset directory.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np

from .exceptions import CropError, HandgunPoseError, ManifestError
from .geometry import BBox, GroundTruthBox, iomin
from .pose_io import DatasetManifest, ManifestEntry
from .pose_render import PoseHalfRenderer, load_bitmap, save_bitmap
from .regions import RegionParams, image_regions

log = logging.getLogger(__name__)

HANDGUN, NO_HANDGUN = "handgun", "no_handgun"
CROP_SIZE = 256
IOMIN_THRESHOLD = 0.5

INDEX_FIELDS = ("crop", "pose", "label", "image_id", "person_id", "side",
                "x_min", "y_min", "x_max", "y_max")


@dataclass
class LabeledRegion:
    crop: np.ndarray  # (256, 256, 3) uint8
    label: str
    source: Tuple[str, int, str]
    pose_half: Optional[np.ndarray] = None  # (512, 256) uint8 in {0, 1}
    box: Optional[BBox] = None

    def __post_init__(self):
        if self.crop.shape[:2] != (CROP_SIZE, CROP_SIZE):
            raise ValueError(f"crop must be {CROP_SIZE}x{CROP_SIZE}, got {self.crop.shape}")
        if self.label not in (HANDGUN, NO_HANDGUN):
            raise ValueError(f"unknown label {self.label!r}")


@dataclass
class BuildReport:
    n_entries: int = 0
    counts: dict = field(default_factory=lambda: {HANDGUN: 0, NO_HANDGUN: 0})
    skipped_entries: List[Tuple[str, str]] = field(default_factory=list)
    pose_excluded: List[Tuple[str, int]] = field(default_factory=list)


def label_region(region_box: BBox, gts: Sequence[GroundTruthBox],
                 threshold: float = IOMIN_THRESHOLD) -> str:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    best = max((iomin(region_box, g.box) for g in gts), default=0.0)
    return HANDGUN if best >= threshold else NO_HANDGUN


def pixel_window(box: BBox, width: int, height: int) -> Tuple[int, int, int, int]:
    """Integer pixel window covering ``box``, clipped to the image."""
    x0 = max(int(math.floor(box.x_min)), 0)
    y0 = max(int(math.floor(box.y_min)), 0)
    x1 = min(int(math.ceil(box.x_max)), width)
    y1 = min(int(math.ceil(box.y_max)), height)
    if x0 >= x1 or y0 >= y1:
        raise CropError(f"box {box.as_tuple()} does not overlap the {width}x{height} image")
    return x0, y0, x1, y1


def crop_and_resize(image: np.ndarray, box: BBox, size: int = CROP_SIZE) -> np.ndarray:
    """Bilinear resample of the clipped box to ``size`` x ``size``; aspect is not kept."""
    x0, y0, x1, y1 = pixel_window(box, image.shape[1], image.shape[0])
    patch = image[y0:y1, x0:x1]
    if patch.shape[:2] == (size, size):
        return patch.copy()
    return cv2.resize(patch, (size, size), interpolation=cv2.INTER_LINEAR)


def read_image(path) -> np.ndarray:
    image = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if image is None:
        raise ManifestError(f"cannot decode image {path}")
    return image


def label_image_regions(image: np.ndarray, skeletons, gts: Sequence[GroundTruthBox],
                        params: RegionParams = RegionParams(), with_pose: bool = False,
                        image_id: str = "", renderer: Optional[PoseHalfRenderer] = None):
    """Labelled regions of one image, plus the persons left out of the pose set."""
    h, w = image.shape[:2]
    renderer = renderer or PoseHalfRenderer()
    by_person = {sk.person_id: sk for sk in skeletons}
    out, excluded = [], []
    for region in image_regions(skeletons, params, w, h):
        pose = None
        if with_pose:
            pose = renderer.transform_one(by_person[region.person_id], region)
            if pose is None:
                excluded.append((image_id, region.person_id))
                continue
        out.append(LabeledRegion(
            crop=crop_and_resize(image, region.box),
            label=label_region(region.box, gts),
            source=(image_id, region.person_id, region.side),
            pose_half=pose,
            box=region.box,
        ))
    return out, excluded


def regions_for_entry(entry: ManifestEntry, params: RegionParams, with_pose: bool,
                      renderer: Optional[PoseHalfRenderer] = None):
    return label_image_regions(read_image(entry.image), entry.load_skeletons(), entry.boxes,
                               params, with_pose, entry.image_id, renderer)


def build_region_dataset(manifest: DatasetManifest, params: RegionParams = RegionParams(),
                         with_pose: bool = False, jobs: int = 1):
    """Return ``(regions, report)``; regions are sorted by their source triple.

    Entries whose image or keypoint file cannot be read are skipped and listed
    in the report.
    """
    renderer = PoseHalfRenderer()

    def work(entry):
        try:
            return entry, regions_for_entry(entry, params, with_pose, renderer), None
        except (HandgunPoseError, OSError) as exc:
            return entry, None, exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, manifest.entries))

    report = BuildReport(n_entries=len(manifest))
    regions = []
    for entry, res, exc in results:
        if exc is not None:
            log.warning("skipping %s: %s", entry.image_id, exc)
            report.skipped_entries.append((entry.image_id, str(exc)))
            continue
        items, excluded = res
        for image_id, person_id in excluded:
            log.warning("%s person %d: skeleton cannot be normalized, excluded from pose dataset",
                        image_id, person_id)
        report.pose_excluded.extend(excluded)
        regions.extend(items)
    regions.sort(key=lambda r: r.source)
    for r in regions:
        report.counts[r.label] += 1
    return regions, report


def write_region_dataset(regions: Sequence[LabeledRegion], out_dir, report: Optional[BuildReport] = None):
    out_dir = Path(out_dir)
    (out_dir / "crops").mkdir(parents=True, exist_ok=True)
    with_pose = any(r.pose_half is not None for r in regions)
    if with_pose:
        (out_dir / "poses").mkdir(exist_ok=True)
    with open(out_dir / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INDEX_FIELDS)
        for n, r in enumerate(regions):
            crop_rel = f"crops/{n:06d}.png"
            cv2.imwrite(str(out_dir / crop_rel), r.crop)
            pose_rel = ""
            if r.pose_half is not None:
                pose_rel = f"poses/{n:06d}.png"
                save_bitmap(r.pose_half, out_dir / pose_rel)
            box = r.box.as_tuple() if r.box is not None else ("", "", "", "")
            writer.writerow((crop_rel, pose_rel, r.label, *r.source, *box))
    meta = {
        "n_regions": len(regions),
        "with_pose": with_pose,
        "counts": {lbl: sum(r.label == lbl for r in regions) for lbl in (HANDGUN, NO_HANDGUN)},
    }
    if report is not None:
        meta["n_entries"] = report.n_entries
        meta["skipped_entries"] = [list(s) for s in report.skipped_entries]
        meta["pose_excluded"] = [list(p) for p in report.pose_excluded]
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_region_dataset(data_dir) -> List[LabeledRegion]:
    data_dir = Path(data_dir)
    index = data_dir / "index.csv"
    if not index.is_file():
        raise ManifestError(f"{data_dir} has no index.csv")
    regions = []
    with open(index, newline="") as fh:
        for row in csv.DictReader(fh):
            crop = read_image(data_dir / row["crop"])
            pose = load_bitmap(data_dir / row["pose"]) if row["pose"] else None
            box = None
            if row.get("x_min"):
                box = BBox(*(float(row[k]) for k in ("x_min", "y_min", "x_max", "y_max")))
            regions.append(LabeledRegion(crop, row["label"],
                                         (row["image_id"], int(row["person_id"]), row["side"]),
                                         pose, box))
    return regions
