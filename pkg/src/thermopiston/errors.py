"""Exception and warning types shared across the package."""


class ThermoPistonError(Exception):
    """Base class for all package errors."""


class DomainError(ThermoPistonError, ValueError):
    """An input lies outside the domain where a quantity is defined."""


class ModelError(ThermoPistonError):
    """A stochastic model is ill-posed (unstable drift, non-PSD noise)."""


class NumericalError(ThermoPistonError, ArithmeticError):
    """A numerical procedure failed to reach its declared tolerance."""


class ConsistencyError(ThermoPistonError, AssertionError):
    """Two independent routes to the same quantity disagree."""


class ValidityWarning(UserWarning):
    """Closed forms evaluated outside the high-temperature regime."""


class RegimeWarning(UserWarning):
    """Cooling parameters violate the weak-damping hierarchy."""


class SimulationWarning(UserWarning):
    """Simulation horizon is short compared to the relaxation time."""
