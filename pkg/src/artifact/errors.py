"""Exception types shared across the package."""


class ArtifactError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedSmoothness(ArtifactError):
    """Requested derivative order does not exist for this covariance family."""


class SingularCovariance(ArtifactError):
    """Covariance matrix could not be factored even after maximum jitter."""


class WrongFamily(ArtifactError):
    """Operation only defined for a specific covariance family."""


class ConfigError(ArtifactError):
    """Invalid configuration or settings."""


class EmptyCurve(ArtifactError):
    """Curve realization produced fewer than two distinct points."""


class DegenerateCurve(ArtifactError):
    """All curve points coincide."""


class ParseError(ArtifactError):
    """Malformed input document."""


class DuplicateLocation(ArtifactError):
    """Dataset contains coincident locations."""


class EmptySamples(ArtifactError):
    """Summary requested for an empty sample sequence."""


class LengthMismatch(ArtifactError):
    """Aligned sequences have different lengths."""
