"""Reading and writing BODY_25 keypoint files and dataset manifests.

Keypoint files follow the OpenPose JSON layout::

    {"people": [{"pose_keypoints_2d": [x1, y1, c1, ..., x25, y25, c25]}, ...]}

A manifest is a JSON Lines file, one image per line::

    {"image": "img/0001.png", "keypoints": "kp/0001.json", "boxes": [[10, 10, 50, 60]]}

An optional ``"id"`` field names the image; otherwise the ``image`` string as
written in the manifest is used. Relative paths resolve against the manifest's
directory.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

from .exceptions import InvalidGeometryError, KeypointParseError, KeypointSchemaError, ManifestError
from .geometry import NUM_KEYPOINTS, BBox, GroundTruthBox, Keypoint2D, Skeleton

FLAT_LENGTH = NUM_KEYPOINTS * 3

PathLike = Union[str, os.PathLike]


def parse_keypoint_file(content: Union[bytes, str]) -> List[Skeleton]:
    """Parse the raw content of a keypoint file into skeletons, in file order."""
    try:
        doc = json.loads(content)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise KeypointParseError(f"keypoint file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "people" not in doc:
        raise KeypointParseError("keypoint file has no top-level 'people' list")
    people = doc["people"]
    if not isinstance(people, list):
        raise KeypointParseError("'people' must be a list")

    skeletons = []
    for idx, record in enumerate(people):
        if not isinstance(record, dict) or "pose_keypoints_2d" not in record:
            raise KeypointParseError(f"person record {idx} has no 'pose_keypoints_2d'")
        flat = record["pose_keypoints_2d"]
        if not isinstance(flat, list):
            raise KeypointParseError(f"person record {idx}: 'pose_keypoints_2d' must be a list")
        if len(flat) != FLAT_LENGTH:
            raise KeypointSchemaError(
                f"person record {idx}: expected {FLAT_LENGTH} numbers, got {len(flat)}"
            )
        values = []
        for v in flat:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise KeypointParseError(f"person record {idx}: non-numeric value {v!r}")
            values.append(float(v))
        kps = tuple(
            Keypoint2D(values[3 * n], values[3 * n + 1], min(max(values[3 * n + 2], 0.0), 1.0))
            for n in range(NUM_KEYPOINTS)
        )
        skeletons.append(Skeleton(kps, person_id=idx))
    return skeletons


def read_keypoint_file(path: PathLike) -> List[Skeleton]:
    return parse_keypoint_file(Path(path).read_bytes())


def serialize_keypoints(skeletons: Sequence[Skeleton]) -> str:
    """Inverse of :func:`parse_keypoint_file` (person ids become file order)."""
    people = []
    for sk in skeletons:
        flat = []
        for kp in sk.keypoints:
            flat.extend((kp.x, kp.y, kp.confidence))
        people.append({"pose_keypoints_2d": flat})
    return json.dumps({"version": 1.3, "people": people})


def write_keypoint_file(path: PathLike, skeletons: Sequence[Skeleton]) -> None:
    Path(path).write_text(serialize_keypoints(skeletons))


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image: Path
    keypoints: Path
    boxes: tuple = ()

    def load_skeletons(self) -> List[Skeleton]:
        return read_keypoint_file(self.keypoints)


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def n_boxes(self) -> int:
        return sum(len(e.boxes) for e in self.entries)


def load_manifest(path: PathLike) -> DatasetManifest:
    """Read and fully validate a manifest; every referenced file must exist."""
    path = Path(path)
    root = path.parent
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    entries = []
    seen_ids = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if not isinstance(rec, dict):
            raise ManifestError(f"{path}:{lineno}: record must be an object")
        missing = {"image", "keypoints", "boxes"} - set(rec)
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing field(s) {sorted(missing)}")

        image_id = str(rec.get("id", rec["image"]))
        if image_id in seen_ids:
            raise ManifestError(f"{path}:{lineno}: duplicate image id {image_id!r}")
        seen_ids.add(image_id)

        image = (root / rec["image"])
        keypoints = (root / rec["keypoints"])
        for p in (image, keypoints):
            if not p.is_file():
                raise ManifestError(f"{path}:{lineno} ({image_id}): missing file {p}")

        if not isinstance(rec["boxes"], list):
            raise ManifestError(f"{path}:{lineno}: 'boxes' must be a list")
        boxes = []
        for b in rec["boxes"]:
            try:
                boxes.append(GroundTruthBox(BBox.from_sequence(b), image_id))
            except (InvalidGeometryError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno} ({image_id}): invalid box {b!r}: {exc}") from exc
        entries.append(ManifestEntry(image_id, image, keypoints, tuple(boxes)))
    return DatasetManifest(entries, root)


def write_manifest(path: PathLike, records: Sequence[dict]) -> None:
    """Write manifest records (already relative to ``path``'s directory)."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
