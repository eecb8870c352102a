"""Exception types shared across the package."""


class SdeLapError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteError(SdeLapError):
    """A computed quantity is NaN or infinite."""


class SingularMatrixError(SdeLapError):
    """A matrix that must be invertible is (numerically) singular."""


class SupportViolationError(SdeLapError):
    """An observation or state lies outside the support of its law."""


class StructureViolationError(SdeLapError):
    """An objective term couples non-adjacent grid points."""


class NotPositiveDefiniteError(SdeLapError):
    """A Hessian required to be positive definite is not."""


class NoConvergenceError(SdeLapError):
    """An iterative solver exhausted its iteration budget."""


class InvalidGridError(SdeLapError):
    """A time grid specification is inconsistent."""


class DomainExitError(SdeLapError):
    """A simulated path left the model's state domain irrecoverably."""


class UnsupportedFormulationError(SdeLapError):
    """The requested formulation does not support this operation."""


class ConfigError(SdeLapError):
    """A run configuration is malformed."""
