import json
import time
from pathlib import Path

import cv2
import numpy as np
import pytest

from handgun_pose.geometry import Keypoint2D, Skeleton

_acceptance_lines = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        status = "PASS" if report.passed else "FAIL"
        _acceptance_lines.append(f"[{status}] {report.nodeid.split('::')[-1]} ({report.duration:.1f}s)")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def make_skeleton(points, person_id=0, conf=0.9):
    """Skeleton from ``{index: (x, y)}``; all other keypoints undefined."""
    kps = [Keypoint2D.undefined()] * 25
    for idx, (x, y) in points.items():
        kps[idx] = Keypoint2D(float(x), float(y), conf)
    return Skeleton(tuple(kps), person_id)


def standing_person(dx=0.0, dy=0.0, person_id=0):
    """Upright person with both forearms pointing down and outwards, hands apart."""
    pts = {
        0: (300, 110), 1: (300, 150), 8: (300, 300),
        2: (270, 150), 3: (240, 210), 4: (210, 250),
        5: (330, 150), 6: (360, 210), 7: (390, 250),
        9: (285, 300), 12: (315, 300),
    }
    return make_skeleton({k: (x + dx, y + dy) for k, (x, y) in pts.items()}, person_id)


# Right-hand region of standing_person() is (157.5, 232.5, 232.5, 307.5).
RIGHT_HAND_GUN = (180.0, 255.0, 215.0, 285.0)


def scene_image(gun_box=None, width=640, height=480, seed=0):
    rng = np.random.default_rng(seed)
    img = np.full((height, width, 3), 120, np.uint8)
    img += rng.integers(0, 8, img.shape, dtype=np.uint8)
    if gun_box is not None:
        x0, y0, x1, y1 = (int(v) for v in gun_box)
        img[y0:y1, x0:x1] = (20, 20, 230)
    return img


def write_scene(root, name, image, skeletons, boxes):
    from handgun_pose.pose_io import write_keypoint_file
    root = Path(root)
    (root / "img").mkdir(exist_ok=True)
    (root / "kp").mkdir(exist_ok=True)
    cv2.imwrite(str(root / "img" / f"{name}.png"), image)
    write_keypoint_file(root / "kp" / f"{name}.json", skeletons)
    return {"id": name, "image": f"img/{name}.png", "keypoints": f"kp/{name}.json",
            "boxes": [list(b) for b in boxes]}


def write_manifest_file(root, records):
    path = Path(root) / "manifest.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


@pytest.fixture
def gun_manifest(tmp_path):
    """Three images: gun in the right hand, no gun, gun in the right hand."""
    records = []
    for n, gun in enumerate([True, False, True]):
        box = RIGHT_HAND_GUN if gun else None
        records.append(write_scene(tmp_path, f"im{n}", scene_image(box, seed=n), [standing_person()],
                                   [box] if gun else []))
    return write_manifest_file(tmp_path, records)


@pytest.fixture(scope="session")
def fixture_model():
    """Reduced HRC trained to flag crops containing the red gun patch."""
    from handgun_pose.autolabel import label_image_regions
    from handgun_pose.classifier import HandRegionClassifier
    from handgun_pose.geometry import BBox, GroundTruthBox

    regions = []
    for n in range(4):
        gts = [GroundTruthBox(BBox(*RIGHT_HAND_GUN))]
        items, _ = label_image_regions(scene_image(RIGHT_HAND_GUN, seed=100 + n),
                                       [standing_person()], gts, image_id=str(n))
        regions.extend(items)
    clf = HandRegionClassifier(epochs=20, seed=3)
    return clf.fit(regions)


@pytest.fixture
def timer():
    class _T:
        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.start
    return _T


def brightness_regions(n=20, seed=0):
    """Separable region fixture: bright noisy crops are handgun, dark ones are not."""
    from handgun_pose.autolabel import LabeledRegion
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        gun = i % 2 == 0
        base = 170 if gun else 70
        crop = np.clip(base + rng.normal(0, 25, (256, 256, 3)), 0, 255).astype(np.uint8)
        out.append(LabeledRegion(crop, "handgun" if gun else "no_handgun", (f"b{i}", 0, "right")))
    return out
