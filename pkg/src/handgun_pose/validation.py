"""Input checks for the region classifiers.

Region crops are accepted as ``(n, 256, 256, 3)`` arrays: uint8 in [0, 255] or
floating point already scaled to [0, 1]. Pose halves are ``(n, 512, 256)``
binary arrays. A single sample without the leading axis is also accepted.
"""
import numpy as np

from .exceptions import DataError, InputShapeError

REGION_HW = (256, 256)
POSE_HW = (512, 256)
CLASSES = ("no_handgun", "handgun")


def check_regions(crops, dtype=np.float32) -> np.ndarray:
    """Return a float array ``(n, 3, 256, 256)`` scaled to [0, 1]."""
    arr = np.asarray(crops)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1:] != (*REGION_HW, 3):
        raise InputShapeError(f"region crops must have shape (n, 256, 256, 3), got {arr.shape}")
    if arr.dtype == np.uint8:
        arr = arr.astype(dtype) / dtype(255.0)
    elif np.issubdtype(arr.dtype, np.floating):
        if arr.size and (np.nanmin(arr) < 0.0 or np.nanmax(arr) > 1.0):
            raise InputShapeError("floating-point crops must already be scaled to [0, 1]")
        arr = arr.astype(dtype)
    else:
        raise InputShapeError(f"unsupported crop dtype {arr.dtype}")
    if not np.isfinite(arr).all():
        raise InputShapeError("crops contain non-finite values")
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2))


def check_pose_halves(poses, n_expected=None, dtype=np.float32) -> np.ndarray:
    """Return a float array ``(n, 1, 512, 256)`` of zeros and ones."""
    arr = np.asarray(poses)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim == 4 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    if arr.ndim != 3 or arr.shape[1:] != POSE_HW:
        raise InputShapeError(f"pose halves must have shape (n, 512, 256), got {arr.shape}")
    if n_expected is not None and arr.shape[0] != n_expected:
        raise InputShapeError(f"got {arr.shape[0]} pose halves for {n_expected} regions")
    return (arr > 0).astype(dtype)[:, None]


def check_labels(y, n_expected) -> np.ndarray:
    """Encode labels as 1 for handgun and 0 for no_handgun."""
    y = np.asarray(y)
    if y.shape != (n_expected,):
        raise DataError(f"expected {n_expected} labels, got shape {y.shape}")
    if y.dtype.kind in "US":
        bad = set(y.tolist()) - set(CLASSES)
        if bad:
            raise DataError(f"unknown labels {sorted(bad)}")
        return (y == "handgun").astype(np.int64)
    if y.dtype.kind in "biu":
        if not np.isin(y, (0, 1)).all():
            raise DataError("integer labels must be 0 (no_handgun) or 1 (handgun)")
        return y.astype(np.int64)
    raise DataError(f"unsupported label dtype {y.dtype}")


def unpack_inputs(X, needs_pose, y=None, dtype=np.float32):
    """Split classifier input ``X`` into ``(crops, poses, y)``.

    ``X`` is a crop array, a ``(crops, pose_halves)`` pair, or a sequence of
    labelled regions (whose labels are used when ``y`` is None).
    """
    poses = None
    if isinstance(X, (list, tuple)) and len(X) == 0:
        raise DataError("no regions given")
    if isinstance(X, (list, tuple)) and hasattr(X[0], "crop"):
        crops = np.stack([r.crop for r in X])
        if needs_pose:
            missing = [r.source for r in X if r.pose_half is None]
            if missing:
                raise DataError(f"{len(missing)} region(s) lack a pose half, e.g. {missing[0]}")
            poses = np.stack([r.pose_half for r in X])
        if y is None:
            y = [r.label for r in X]
    elif isinstance(X, tuple) and len(X) == 2:
        crops, poses = X
    else:
        crops = X
    crops = check_regions(crops, dtype)
    if needs_pose:
        if poses is None:
            raise DataError("the pose-fused model needs a pose half for every region")
        poses = check_pose_halves(poses, crops.shape[0], dtype)
    else:
        poses = None
    if y is not None:
        y = check_labels(y, crops.shape[0])
    return crops, poses, y
