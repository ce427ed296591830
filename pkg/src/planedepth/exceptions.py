"""Exception hierarchy shared across the toolkit."""


class PlaneDepthError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PlaneDepthError):
    """Non-finite or otherwise malformed input values."""


class DegenerateRayError(PlaneDepthError):
    """Viewing ray nearly parallel to the plane; depth is undefined."""


class RankDeficientError(PlaneDepthError):
    """Too few or collinear points for a plane fit."""


class NoConsensusError(PlaneDepthError):
    """RANSAC failed to find a model with enough inliers."""


class NoDataError(PlaneDepthError):
    """An operation that needs at least one depth sample got none."""


class InfeasibleNodeError(PlaneDepthError):
    """Every label of some MRF node has infinite cost."""


class ModeMismatchError(PlaneDepthError):
    """Cardboard-only output requested from a planar-mode result."""


class InvalidRoadPlaneError(PlaneDepthError):
    """Road plane orientation incompatible with the cardboard model."""


class NoOverlapError(PlaneDepthError):
    """Prediction and ground truth share no valid pixels."""


class InvalidSceneError(PlaneDepthError):
    """Synthetic scene specification yields non-positive depths."""


class ParseError(PlaneDepthError):
    """Malformed input file."""


class CalibError(ParseError):
    """Missing or malformed calibration entry."""


class RangeError(PlaneDepthError):
    """Value outside the representable range of a file format."""
