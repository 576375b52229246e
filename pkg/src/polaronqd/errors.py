"""Exception and warning types shared across the package."""


class PolaronError(Exception):
    """Base class for all numerical/domain errors raised by polaronqd."""


class DomainError(PolaronError, ValueError):
    pass


class DistributionalDensity(PolaronError):
    """Raised when a pointwise value of a delta-function spectral density is requested."""


class QuadratureFailure(PolaronError):
    pass


class GridError(PolaronError, ValueError):
    pass


class RangeError(PolaronError, ValueError):
    pass


class UnsupportedParams(PolaronError, ValueError):
    pass


class NoRootInInterval(PolaronError):
    pass


class NonConvergence(PolaronError):
    pass


class DimensionOverflow(PolaronError):
    pass


class ValidityViolation(PolaronError):
    """g exceeds delta_ph, where the perturbative treatment of the cavity coupling breaks down."""


class ConfigError(PolaronError):
    """Invalid scenario configuration; ``where`` locates the offending field."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class AccuracyWarning(UserWarning):
    pass


class ValidityWarning(UserWarning):
    """The weak-coupling condition g << delta_ph is not satisfied."""
