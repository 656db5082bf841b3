"""Exception hierarchy shared by every module."""


class MiaLabError(ValueError):
    """Base class for all library errors."""


class DimensionMismatch(MiaLabError):
    pass


class FactorizationError(MiaLabError):
    """A matrix that must be positive definite failed to factorize."""


class InsufficientReferenceSamples(MiaLabError):
    """Too few reference rows to build the requested statistic."""


class InconsistentConstraints(MiaLabError):
    pass


class EvaluationError(MiaLabError):
    """An attack or generator failed during evaluation; carries trial context."""


class ConfigError(MiaLabError):
    pass


class InvalidParameter(MiaLabError):
    """An argument is outside the documented domain of an operation."""
