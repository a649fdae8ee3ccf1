"""Exception hierarchy shared by all modules."""


class TauflatError(Exception):
    """Base class for every error raised by the package."""


class InvalidGroup(TauflatError, ValueError):
    pass


class InvalidSurface(TauflatError, ValueError):
    pass


class BranchCut(TauflatError):
    """An eigenvalue sits too close to -1 for the principal logarithm."""


class SingularProjection(TauflatError):
    pass


class OffVariety(TauflatError):
    pass


class AlreadyOrientable(TauflatError):
    pass


class SamplingExhausted(TauflatError):
    pass


class NoConvergence(TauflatError):
    pass


class PreconditionViolation(TauflatError, ValueError):
    pass


class NonCentralTwist(TauflatError):
    pass


class NormalizationFailed(TauflatError):
    pass


class NonCentralObstruction(TauflatError):
    pass


class SearchTooLarge(TauflatError):
    pass


class SchemaMismatch(TauflatError):
    pass


class InvalidConfig(TauflatError, ValueError):
    """An experiment configuration that cannot be run."""
