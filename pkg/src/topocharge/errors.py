"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument violates a documented precondition."""


class DegenerateSeparationError(ValueError):
    """Two-point machinery requested at a separation where the field-value
    covariance block K becomes singular (points effectively coincide)."""


class ConditioningError(RuntimeError):
    """A linear solve hit a numerically singular matrix.

    Carries a condition-number estimate of the offending matrix.
    """

    def __init__(self, message, cond_estimate=None):
        if cond_estimate is not None:
            message = f"{message} (condition estimate {cond_estimate:.3e})"
        super().__init__(message)
        self.cond_estimate = cond_estimate


class NumericalFailureError(RuntimeError):
    """A numerical procedure (quadrature, fit, refinement) failed to converge.

    ``operation`` names the failing sub-operation for diagnostics.
    """

    def __init__(self, operation, message):
        super().__init__(f"{operation}: {message}")
        self.operation = operation
