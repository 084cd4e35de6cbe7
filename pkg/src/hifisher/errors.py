"""Exception hierarchy."""


class HiFisherError(Exception):
    """Base class for all package errors."""


class DomainError(HiFisherError, ValueError):
    """A parameter value lies outside (or on the boundary of) its domain."""


class NonPositiveInformation(HiFisherError, ArithmeticError):
    """A Fisher matrix has an eigenvalue below the allowed noise floor."""

    def __init__(self, message, *, eigenvalue=None, tolerance=None, theta=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.tolerance = tolerance
        self.theta = theta


class TooManyRejections(HiFisherError, ArithmeticError):
    """More than 1% of Monte Carlo evaluations were non-finite."""


class NonFiniteLogDensity(HiFisherError, ArithmeticError):
    """A log density returned NaN/inf where a finite value is required."""


class StepUnderflow(HiFisherError, ArithmeticError):
    """The finite-difference stencil cannot be fitted inside the domain."""


class QuadratureNotConverged(HiFisherError, ArithmeticError):
    """Doubling the quadrature nodes changed the result beyond tolerance."""


class SamplerError(HiFisherError, RuntimeError):
    """A sampler produced output of the wrong shape or non-finite draws."""
