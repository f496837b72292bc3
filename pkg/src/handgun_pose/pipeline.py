"""End-to-end handgun detection: skeletons -> hand regions -> classifier -> boxes.

Every hand region is classified; those labelled ``handgun`` are emitted as
detections with the region box unchanged and the handgun probability as score.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .autolabel import crop_and_resize, label_image_regions, read_image
from .classifier import SCORE_THRESHOLD, HandRegionClassifier
from .exceptions import HandgunPoseError, NormalizationError
from .geometry import BBox, Detection, GroundTruthBox, Skeleton
from .networks import HRC_P
from .pose_io import DatasetManifest
from .pose_render import CANVAS_SIZE, HALF_WIDTH, PoseHalfRenderer, select_half
from .regions import RegionParams, image_regions

log = logging.getLogger(__name__)

DETECTION_FIELDS = ("image_id", "x_min", "y_min", "x_max", "y_max", "score")


@dataclass
class RegionRecord:
    box: tuple
    person_id: int
    side: str
    score: float
    label: str
    pose_fallback: bool = False


@dataclass
class DetectionResult:
    image_id: str
    detections: List[Detection] = field(default_factory=list)
    diagnostics: List[RegionRecord] = field(default_factory=list)

    def diagnostics_dict(self) -> dict:
        return {"image_id": self.image_id, "regions": [asdict(r) for r in self.diagnostics]}


def _pose_halves(skeletons, regions, renderer):
    """Pose half per region; all-zero (flagged) when the skeleton cannot be normalized."""
    canvases = {}
    for sk in skeletons:
        try:
            canvases[sk.person_id] = renderer.render(sk)
        except NormalizationError as exc:
            log.debug("person %d: %s", sk.person_id, exc)
            canvases[sk.person_id] = None
    halves, fallback = [], []
    for region in regions:
        rendered = canvases.get(region.person_id)
        half = None
        if rendered is not None:
            ns, canvas = rendered
            try:
                half = select_half(region, ns, canvas, renderer.px_per_unit).pixels
            except HandgunPoseError:
                half = None
        fallback.append(half is None)
        halves.append(np.zeros((CANVAS_SIZE, HALF_WIDTH), np.uint8) if half is None else half)
    return halves, fallback


def detect(image: np.ndarray, skeletons: Sequence[Skeleton], model: HandRegionClassifier,
           params: RegionParams = RegionParams(), image_id: str = "",
           renderer: Optional[PoseHalfRenderer] = None) -> DetectionResult:
    h, w = image.shape[:2]
    regions = image_regions(skeletons, params, w, h)
    result = DetectionResult(image_id)
    if not regions:
        return result

    crops = np.stack([crop_and_resize(image, r.box) for r in regions])
    fallback = [False] * len(regions)
    if model.variant == HRC_P:
        halves, fallback = _pose_halves(skeletons, regions, renderer or PoseHalfRenderer())
        scores = model.predict_proba((crops, np.stack(halves)))[:, 1]
    else:
        scores = model.predict_proba(crops)[:, 1]

    for region, score, fb in zip(regions, scores, fallback):
        score = float(score)
        label = "handgun" if score >= SCORE_THRESHOLD else "no_handgun"
        result.diagnostics.append(RegionRecord(region.box.as_tuple(), region.person_id,
                                               region.side, score, label, fb))
        if label == "handgun":
            result.detections.append(Detection(region.box, score))
    return result


def format_detections(results: Sequence[DetectionResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DETECTION_FIELDS)
    for res in results:
        for d in res.detections:
            writer.writerow((res.image_id, *(repr(v) for v in d.box.as_tuple()), repr(d.score)))
    return buf.getvalue()


def read_detections(path) -> Dict[str, List[Detection]]:
    out: Dict[str, List[Detection]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != DETECTION_FIELDS:
            raise HandgunPoseError(f"{path}: expected header {','.join(DETECTION_FIELDS)}")
        for row in reader:
            box = BBox(*(float(row[k]) for k in DETECTION_FIELDS[1:5]))
            out.setdefault(row["image_id"], []).append(Detection(box, float(row["score"])))
    return out


def detect_batch(manifest: DatasetManifest, model: HandRegionClassifier,
                 params: RegionParams = RegionParams(), out_path=None, jobs: int = 1):
    """Run :func:`detect` over a manifest, in manifest order.

    Returns ``(results, failures)``. When ``out_path`` is given the detections
    file is written there and the per-image diagnostics next to it as
    ``<out_path>.diagnostics.json``.
    """
    renderer = PoseHalfRenderer()

    def work(entry):
        try:
            image = read_image(entry.image)
            return detect(image, entry.load_skeletons(), model, params, entry.image_id, renderer), None
        except (HandgunPoseError, OSError) as exc:
            log.warning("skipping %s: %s", entry.image_id, exc)
            return None, (entry.image_id, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(work, manifest.entries))
    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]

    if out_path is not None:
        out_path = Path(out_path)
        out_path.write_text(format_detections(results))
        sidecar = {"images": [r.diagnostics_dict() for r in results],
                   "failures": [list(f) for f in failures]}
        Path(f"{out_path}.diagnostics.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return results, failures


class HandgunDetector(BaseEstimator):
    """Pose-guided handgun detector over ``(image, skeletons)`` pairs.

    ``fit`` builds the auto-labelled region set from ground-truth boxes and
    trains ``classifier``; ``predict`` returns one :class:`DetectionResult`
    per image.
    """

    def __init__(self, classifier=None, conf_threshold=0.3, extension_k=0.5, scale_s=1.5,
                 merge_iou=0.4):
        self.classifier = classifier
        self.conf_threshold = conf_threshold
        self.extension_k = extension_k
        self.scale_s = scale_s
        self.merge_iou = merge_iou

    def region_params(self) -> RegionParams:
        return RegionParams(self.conf_threshold, self.extension_k, self.scale_s, self.merge_iou)

    def fit(self, X, y):
        """``X``: sequence of ``(image, skeletons)``; ``y``: ground-truth boxes per image."""
        if len(X) != len(y):
            raise ValueError(f"got {len(X)} images but {len(y)} box lists")
        clf = self.classifier if self.classifier is not None else HandRegionClassifier()
        with_pose = clf.variant == HRC_P
        params = self.region_params()
        regions = []
        for n, ((image, skeletons), boxes) in enumerate(zip(X, y)):
            gts = [b if isinstance(b, GroundTruthBox) else GroundTruthBox(BBox.from_sequence(b))
                   for b in boxes]
            items, _ = label_image_regions(image, skeletons, gts, params, with_pose, str(n))
            regions.extend(items)
        self.classifier_ = clf.fit(regions)
        self.n_regions_ = len(regions)
        return self

    def _model(self):
        if hasattr(self, "classifier_"):
            return self.classifier_
        if self.classifier is not None and hasattr(self.classifier, "model_"):
            return self.classifier
        check_is_fitted(self, "classifier_")

    def predict(self, X, image_ids=None) -> List[DetectionResult]:
        model = self._model()
        params = self.region_params()
        ids = image_ids if image_ids is not None else [str(n) for n in range(len(X))]
        return [detect(image, sks, model, params, image_id)
                for (image, sks), image_id in zip(X, ids)]
