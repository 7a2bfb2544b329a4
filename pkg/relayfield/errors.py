"""Exception hierarchy shared by the numerical services, the CLI and the HTTP layer."""

from __future__ import annotations


class RelayFieldError(Exception):
    """Base class for every error raised on purpose by relayfield."""


class DomainError(RelayFieldError, ValueError):
    """An argument lies outside the domain of the function it was passed to."""


class DegenerateGeometryError(DomainError):
    """The relay coincides with the source or the destination."""


class DivergenceError(DomainError):
    """A quantity that only exists for alpha > 2 was requested outside that range."""


class NumericalRangeError(RelayFieldError):
    """An exact probability formula evaluated outside [-eps, 1 + eps]."""


class QuadratureAccuracyError(RelayFieldError):
    """Adaptive integration gave up before reaching its tolerance."""

    def __init__(self, message: str, *, estimate: float, error_bound: float) -> None:
        super().__init__(f"{message} (estimate={estimate:.10g}, error bound={error_bound:.3g})")
        self.estimate = estimate
        self.error_bound = error_bound


class BracketExhaustedError(RelayFieldError):
    """The target outage is still met at the top of the threshold bracket."""


class ValidationFailure(RelayFieldError):
    """At least one analytic-vs-simulation acceptance check failed."""
