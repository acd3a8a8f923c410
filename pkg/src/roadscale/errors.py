"""Exception types shared across the toolkit.

Per-frame pipeline code catches :class:`RoadscaleError` and records the
subclass name in reports instead of aborting the batch.
"""


class RoadscaleError(Exception):
    """Base class for all toolkit errors."""


# geometry
class InvalidDepth(RoadscaleError):
    """Depth value is non-positive or non-finite."""


class BehindCamera(RoadscaleError):
    """Point has z <= 0 and cannot be projected."""


class NoGroundIntersection(RoadscaleError):
    """Viewing ray is at or above the horizon; it never meets the ground plane."""


class ShapeMismatch(RoadscaleError):
    """Raster dimensions disagree with each other or with the intrinsics."""


# plane fitting
class TooFewPoints(RoadscaleError):
    """Fewer input points than the configured minimum."""


class DegenerateGeometry(RoadscaleError):
    """No usable (non-collinear) point triplet could be sampled."""


class TooFewInliers(RoadscaleError):
    """Fewer than 3 points inside the refinement band."""


# calibration
class NoRoadPixels(RoadscaleError):
    """No road-labeled pixel survived validity and distance gating."""


class ImplausibleRoadPlane(RoadscaleError):
    """Fitted plane is too steep (or inverted) to be a road surface."""


class NoGroundTruth(RoadscaleError):
    """Ground-truth raster is absent or has no valid pixel."""


class DegeneratePrediction(RoadscaleError):
    """Median of the prediction is zero; no scale can be formed."""


class EmptyInput(RoadscaleError):
    """Operation received an empty collection."""


class InvalidScale(RoadscaleError):
    """Scale factor is non-positive or non-finite."""


# metrics
class NoValidPixels(RoadscaleError):
    """Evaluation set is empty after masking and cropping."""


# data I/O
class FormatError(RoadscaleError):
    """File content does not match the expected format."""


class MissingInput(RoadscaleError):
    """A mandatory input file is absent."""


class IoError(RoadscaleError):
    """Report or raster could not be written."""
