"""Exception hierarchy shared by all subpackages."""


class LevyKalmanError(Exception):
    """Base class for every error raised by this package."""


class RegimeError(LevyKalmanError, ValueError):
    """Parameters fall outside the integrable, infinite-variance regime (1 < alpha < 2)."""


class ResolutionError(LevyKalmanError, ValueError):
    """A tabulated measure does not cover the requested cutoff."""


class InfiniteVarianceError(LevyKalmanError, ValueError):
    """A covariance was requested for a model with untruncated infinite-variance components."""


class SingularityError(LevyKalmanError, ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""

    def __init__(self, message, cutoff=None):
        super().__init__(message)
        self.cutoff = cutoff


class DegeneracyError(SingularityError):
    """D(t) D(t)^T has an eigenvalue below the floor, so G(t) is undefined."""


class ConvergenceError(LevyKalmanError, RuntimeError):
    """A cutoff ladder did not settle within tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class GridError(LevyKalmanError, ValueError):
    """Invalid time grid (non-positive step, misaligned paths, ...)."""


class ModelError(LevyKalmanError, ValueError):
    """Inconsistent shapes or invariants in a model definition."""


class InstabilityError(LevyKalmanError, FloatingPointError):
    """The Riccati integration blew up."""


class LemmaBoundViolation(LevyKalmanError, AssertionError):
    """A mean-squared-error matrix exceeded d1 * E|Y(t)|^2."""


class RegistrationError(LevyKalmanError, KeyError):
    """A competitor with this name is already registered."""


class ConfigError(LevyKalmanError, ValueError):
    """Config file does not match the documented schema."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class DomainError(LevyKalmanError, ValueError):
    """An argument lies outside the domain of a function (e.g. negative time)."""
