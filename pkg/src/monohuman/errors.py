"""Exception types shared across the package."""


class MonohumanError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MonohumanError):
    """Inconsistent or invalid configuration."""


class ShapeMismatch(MonohumanError):
    """Tensor/image shapes do not satisfy an operation's contract."""


class DimensionMismatch(MonohumanError):
    """Feature batches disagree in dimensionality or are too small."""


class EmptyInput(MonohumanError):
    """An operation requiring a non-empty input received an empty one."""


class EmptyMesh(MonohumanError):
    """An operation requiring a non-empty mesh received an empty one."""


class SurfaceSamplingFailed(MonohumanError):
    """Too few surface hits while sampling points near the body surface."""


class DivergenceError(MonohumanError):
    """Training loss stayed non-finite for too many consecutive steps."""


class NoFullBodyGuidance(MonohumanError):
    """Source corpus contains no full-body guidance exemplars."""


class EmptySubsetError(MonohumanError):
    """Score thresholding retained zero candidate pairs."""


class GuidanceKindError(MonohumanError):
    """Guidance of the wrong kind fed to a network head."""


class StageError(MonohumanError):
    """A pipeline stage failed; the run ledger records partial progress."""
