"""Command-line entry point: ``handgun-pose <command> ...``.

Settings are resolved as flag > config file > built-in default. The config file
is JSON with optional ``region``, ``model`` and ``train`` sections, e.g.::

    {"region": {"conf_threshold": 0.3, "extension_k": 0.5, "scale_s": 1.5, "merge_iou": 0.4},
     "model": {"variant": "hrc_p", "backbone": "reduced"},
     "train": {"epochs": 60, "batch_size": 4, "learning_rate": 0.0001, "seed": 0}}

It is given with ``--config`` or the ``HANDGUN_POSE_CONFIG`` environment variable.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import cv2
from PIL import Image

from . import __version__
from .autolabel import build_region_dataset, crop_and_resize, load_region_dataset, read_image, write_region_dataset
from .classifier import HandRegionClassifier, load_checkpoint, save_checkpoint
from .evaluation import emit_pr_curve, evaluate
from .exceptions import HandgunPoseError, ManifestError
from .networks import HRC_P
from .pipeline import detect_batch, read_detections
from .pose_io import load_manifest, write_keypoint_file, write_manifest
from .regions import RegionParams, image_regions
from .transforms import DEFAULT_VALUE_SCALE, darken, far_transform, hflip

log = logging.getLogger("handgun_pose")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
CONFIG_ENV = "HANDGUN_POSE_CONFIG"

DEFAULTS = {
    "region": {"conf_threshold": 0.3, "extension_k": 0.5, "scale_s": 1.5, "merge_iou": 0.4},
    "model": {"variant": "hrc", "backbone": "reduced"},
    "train": {"epochs": 60, "batch_size": 4, "learning_rate": 1e-4, "seed": 0},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(path):
    path = path or os.environ.get(CONFIG_ENV)
    cfg = {k: dict(v) for k, v in DEFAULTS.items()}
    if not path:
        return cfg
    try:
        user = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for section, values in user.items():
        if section not in cfg or not isinstance(values, dict):
            raise UsageError(f"unknown config section {section!r}")
        unknown = set(values) - set(cfg[section])
        if unknown:
            raise UsageError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
        cfg[section].update(values)
    return cfg


def resolve(args, cfg, section, key, flag=None):
    value = getattr(args, flag or key, None)
    return cfg[section][key] if value is None else value


def region_params(args, cfg) -> RegionParams:
    try:
        return RegionParams(**{k: resolve(args, cfg, "region", k) for k in DEFAULTS["region"]})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _ensure_out_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_extract_regions(args, cfg):
    manifest = load_manifest(args.manifest)
    params = region_params(args, cfg)
    out = _ensure_out_dir(args.out_dir)
    (out / "crops").mkdir(exist_ok=True)
    rows, failures = [], []
    for entry in manifest:
        try:
            image = read_image(entry.image)
            regions = image_regions(entry.load_skeletons(), params, image.shape[1], image.shape[0])
        except HandgunPoseError as exc:
            log.warning("skipping %s: %s", entry.image_id, exc)
            failures.append(entry.image_id)
            continue
        for region in regions:
            crop_rel = f"crops/{len(rows):06d}.png"
            cv2.imwrite(str(out / crop_rel), crop_and_resize(image, region.box))
            rows.append((entry.image_id, region.person_id, region.side,
                         *(repr(v) for v in region.box.as_tuple()), crop_rel))
    with open(out / "regions.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("image_id", "person_id", "side", "x_min", "y_min", "x_max", "y_max", "crop"))
        writer.writerows(rows)
    print(f"extracted {len(rows)} regions from {len(manifest) - len(failures)} images")
    return EXIT_OK


def cmd_build_dataset(args, cfg):
    manifest = load_manifest(args.manifest)
    params = region_params(args, cfg)
    regions, report = build_region_dataset(manifest, params, with_pose=args.with_pose, jobs=args.jobs)
    write_region_dataset(regions, _ensure_out_dir(args.out_dir), report)
    print(f"built {len(regions)} regions: {report.counts['handgun']} handgun, "
          f"{report.counts['no_handgun']} no_handgun; skipped {len(report.skipped_entries)} entries, "
          f"{len(report.pose_excluded)} pose exclusions")
    return EXIT_OK


def cmd_train(args, cfg):
    variant = resolve(args, cfg, "model", "variant")
    backbone = resolve(args, cfg, "model", "backbone")
    recipe = {k: resolve(args, cfg, "train", k) for k in DEFAULTS["train"]}
    if variant not in ("hrc", "hrc_p") or backbone not in ("full", "reduced"):
        raise UsageError(f"bad model choice variant={variant} backbone={backbone}")
    print(f"train variant={variant} backbone={backbone} batch_size={recipe['batch_size']} "
          f"epochs={recipe['epochs']} learning_rate={recipe['learning_rate']} seed={recipe['seed']}")

    dataset = load_region_dataset(args.dataset_dir)
    if not dataset:
        raise HandgunPoseError(f"{args.dataset_dir} holds no regions")
    if variant == HRC_P and any(r.pose_half is None for r in dataset):
        raise HandgunPoseError("hrc_p needs pose halves; rebuild the dataset with --with-pose")

    clf = HandRegionClassifier(variant, backbone, verbose=args.verbose, **recipe)
    clf.fit(dataset)
    save_checkpoint(clf, args.out_ckpt)
    with open(f"{args.out_ckpt}.loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("epoch", "loss"))
        writer.writerow((0, repr(clf.initial_loss_)))
        for n, loss in enumerate(clf.loss_curve_, start=1):
            writer.writerow((n, repr(loss)))
    print(f"final loss {clf.loss_curve_[-1]:.6f}; training accuracy {clf.score(dataset):.4f}")
    return EXIT_OK


def cmd_detect(args, cfg):
    manifest = load_manifest(args.manifest)
    model = load_checkpoint(args.ckpt)
    params = region_params(args, cfg)
    Path(args.out_file).parent.mkdir(parents=True, exist_ok=True)
    results, failures = detect_batch(manifest, model, params, args.out_file, jobs=args.jobs)
    n = sum(len(r.detections) for r in results)
    print(f"{n} detections over {len(results)} images ({len(failures)} skipped)")
    return EXIT_OK


def cmd_eval(args, cfg):
    manifest = load_manifest(args.manifest)
    dets = read_detections(args.detections)
    gts = {e.image_id: list(e.boxes) for e in manifest}
    unknown = set(dets) - set(gts)
    if unknown:
        raise HandgunPoseError(f"detections reference images not in the manifest: {sorted(unknown)[:5]}")
    report = evaluate(dets, gts, iomin_threshold=args.iomin, score_threshold=args.score)
    out = Path(args.out_report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    emit_pr_curve(report, args.pr_curve or out.with_suffix(".pr.csv"))
    tp, fp, fn = report.counts
    print(f"precision {report.precision_05:.4f} recall {report.recall_05:.4f} AP {report.ap:.2f} "
          f"(tp={tp} fp={fp} fn={fn})")
    return EXIT_OK


def _preflight(manifest):
    """Check every image and keypoint file decodes before any output is written."""
    for entry in manifest:
        try:
            with Image.open(entry.image) as im:
                im.verify()
        except Exception as exc:
            raise ManifestError(f"{entry.image_id}: unreadable image {entry.image} ({exc})") from exc
        entry.load_skeletons()


def cmd_transform(args, cfg):
    manifest = load_manifest(args.manifest)
    if args.op == "dark" and not 0.0 < args.value_scale <= 1.0:
        raise UsageError(f"--value-scale must lie in (0, 1], got {args.value_scale}")
    _preflight(manifest)
    out = _ensure_out_dir(args.out_dir)
    (out / "images").mkdir(exist_ok=True)
    (out / "keypoints").mkdir(exist_ok=True)
    records = []
    for n, entry in enumerate(manifest):
        image = read_image(entry.image)
        gts, skeletons = list(entry.boxes), entry.load_skeletons()
        if args.op == "flip":
            image, gts, skeletons = hflip(image, gts, skeletons)
        elif args.op == "far":
            image, gts, skeletons = far_transform(image, gts, skeletons, center=args.center)
        else:
            image = darken(image, args.value_scale)
        image_rel, kp_rel = f"images/{n:06d}.png", f"keypoints/{n:06d}.json"
        cv2.imwrite(str(out / image_rel), image)
        write_keypoint_file(out / kp_rel, skeletons)
        records.append({"id": entry.image_id, "image": image_rel, "keypoints": kp_rel,
                        "boxes": [list(g.box.as_tuple()) for g in gts]})
    write_manifest(out / "manifest.jsonl", records)
    print(f"wrote {len(records)} {args.op} images to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="handgun-pose", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for per-image work")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def region_flags(p):
        p.add_argument("--conf-threshold", dest="conf_threshold", type=float)
        p.add_argument("--extension-k", dest="extension_k", type=float)
        p.add_argument("--scale-s", dest="scale_s", type=float)
        p.add_argument("--merge-iou", dest="merge_iou", type=float)

    p = sub.add_parser("extract-regions", help="write hand-region boxes and debug crops")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    region_flags(p)
    p.set_defaults(func=cmd_extract_regions)

    p = sub.add_parser("build-dataset", help="build the auto-labelled region dataset")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--with-pose", action="store_true", help="attach pose halves for the fused model")
    region_flags(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train a region classifier")
    p.add_argument("dataset_dir")
    p.add_argument("out_ckpt")
    p.add_argument("--variant", choices=("hrc", "hrc_p"))
    p.add_argument("--backbone", choices=("full", "reduced"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect handguns over a manifest")
    p.add_argument("manifest")
    p.add_argument("ckpt")
    p.add_argument("out_file")
    region_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score a detections file against a manifest")
    p.add_argument("detections")
    p.add_argument("manifest")
    p.add_argument("out_report")
    p.add_argument("--iomin", type=float, default=0.5)
    p.add_argument("--score", type=float, default=0.5)
    p.add_argument("--pr-curve", dest="pr_curve", help="PR-curve CSV (default: <report>.pr.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transform", help="write a flipped, darkened or far version of a dataset")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--op", choices=("flip", "dark", "far"), required=True)
    p.add_argument("--value-scale", dest="value_scale", type=float, default=DEFAULT_VALUE_SCALE)
    p.add_argument("--center", action="store_true", help="far: centre the content instead of top-left")
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"handgun-pose: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HandgunPoseError, ValueError) as exc:
        print(f"handgun-pose: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"handgun-pose: runtime error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
