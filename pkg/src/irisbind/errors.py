"""Exception hierarchy for the iris pipeline."""


class IrisError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(IrisError, ValueError):
    pass


class ParameterError(IrisError, ValueError):
    pass


class GeometryError(IrisError, ValueError):
    pass


class NoEdgesError(IrisError):
    pass


class SegmentationError(IrisError):
    """Recovered circles violate pupil-inside-iris containment."""

    def __init__(self, message, pupil=None, iris=None):
        super().__init__(message)
        self.pupil = pupil
        self.iris = iris


class UnwrapError(IrisError):
    pass


class DegenerateInputError(IrisError, ValueError):
    pass


class RegistrationError(IrisError):
    pass


class IncomparableError(IrisError):
    """Two templates share no valid bits."""


class FormatError(IrisError, ValueError):
    pass


class KeyReleaseError(IrisError):
    """Key could not be recovered from a commitment.

    ``reason`` is ``"decode"`` when the outer code gave up and ``"digest"``
    when a candidate key was produced but did not hash to the stored digest.
    """

    def __init__(self, message, reason):
        super().__init__(message)
        self.reason = reason


class PipelineError(IrisError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds
    the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class LookupFailure(IrisError, KeyError):
    """Unknown identity in an enrollment store."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown identity"
