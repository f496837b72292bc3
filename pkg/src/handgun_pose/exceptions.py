"""Exception hierarchy shared by every stage of the detector."""


class HandgunPoseError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(HandgunPoseError, ValueError):
    """A box has zero or negative extent."""


class KeypointParseError(HandgunPoseError, ValueError):
    """A keypoint file is structurally malformed."""


class KeypointSchemaError(KeypointParseError):
    """A person record does not hold exactly 75 numbers."""


class ManifestError(HandgunPoseError, ValueError):
    """A dataset manifest is malformed or references missing files."""


class NormalizationError(HandgunPoseError, ValueError):
    """Neck or MidHip is missing, so the skeleton cannot be normalized."""


class DegenerateSkeletonError(NormalizationError):
    """Neck and MidHip coincide, so the scale factor is zero."""


class HalfSelectionError(HandgunPoseError, ValueError):
    """The wrist anchoring a hand region is undefined in the skeleton."""


class CropError(HandgunPoseError, ValueError):
    """A crop box does not overlap the image."""


class ConfigError(HandgunPoseError, ValueError):
    """Model or training configuration is inconsistent."""


class DataError(HandgunPoseError, ValueError):
    """Training data does not fit the model variant."""


class CheckpointError(HandgunPoseError):
    """A checkpoint file is corrupt or does not match its declared config."""


class EvaluationUndefinedError(HandgunPoseError, ValueError):
    """Metrics requested on a dataset with no ground-truth boxes."""


class ParameterError(HandgunPoseError, ValueError):
    """A transform parameter is out of range."""


class InputShapeError(HandgunPoseError, ValueError):
    """Classifier inputs do not have the shape the model variant expects."""
