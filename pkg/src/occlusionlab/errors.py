"""Exception types shared across the toolkit.

Exit-code mapping in the CLI: ValidationError and its subclasses exit
with code 1, everything else unexpected exits with code 2.
"""


class OcclusionLabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(OcclusionLabError):
    """Invalid input data or configuration supplied by the caller."""


class AnnotationError(ValidationError):
    """Malformed or inconsistent annotation file."""


class GeometryError(ValidationError):
    """Part geometry falls outside the image bounds.

    ``clipped_pixels`` counts the mask pixels that would land outside
    the target canvas.
    """

    def __init__(self, message: str, clipped_pixels: int = 0):
        super().__init__(message)
        self.clipped_pixels = clipped_pixels


class BackendError(OcclusionLabError):
    """A generative backend call failed."""


class BackendUnavailableError(BackendError):
    """The backend could not be reached (connection-level failure)."""


class CapabilityError(BackendError):
    """The request asks for something the backend does not support.

    Raised e.g. for unknown feature taps, image sides that are not a
    multiple of the backend's required divisor, or timesteps outside
    the declared schedule range. The message names the valid options.
    """
