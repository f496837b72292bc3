"""Handgun detection from hand-region appearance fused with body pose."""

__version__ = "0.1.0"

from .autolabel import LabeledRegion, build_region_dataset, crop_and_resize, label_region
from .classifier import (HandRegionClassifier, ModelCheckpoint, ModelConfig, TrainConfig, build_model,
                         load_checkpoint, save_checkpoint, train)
from .evaluation import EvalReport, average_precision, emit_pr_curve, evaluate, match_detections
from .geometry import BBox, Detection, GroundTruthBox, Keypoint2D, Skeleton, area, intersect, iomin, iou
from .pipeline import DetectionResult, HandgunDetector, detect, detect_batch
from .pose_io import DatasetManifest, load_manifest, parse_keypoint_file
from .pose_render import PoseHalfRenderer, normalize_skeleton, render_canvas, select_half, split_canvas
from .regions import HandRegion, HandRegionExtractor, RegionParams, clip_to_image, extract_hand_regions, hand_box_from_forearm
from .transforms import darken, far_transform, hflip
