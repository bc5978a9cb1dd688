"""Exception types shared across the package."""


class ArtisegError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(ArtisegError):
    """A numeric argument violates a documented precondition."""


class InputFormatError(ArtisegError):
    """Input files or arrays are missing, malformed, or inconsistent."""


class FitFailureError(ArtisegError):
    """A robust model fit could not find enough inliers."""


class DegenerateGeometryError(ArtisegError):
    """The scene geometry does not constrain the optimization."""


class EmptySegmentationError(ArtisegError):
    """Segmentation produced no object points."""


class GenerationError(ArtisegError):
    """A synthetic scene could not be rendered as specified."""
