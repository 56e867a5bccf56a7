"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChemostatError(Exception):
    """Base class for all package errors."""


class DomainError(ChemostatError, ValueError):
    """An evaluation was requested outside a function's domain."""


class InvalidYieldError(ChemostatError, ValueError):
    """Yield law is non-positive at a substrate level where it was needed."""


class ValidationError(ChemostatError, ValueError):
    """A scenario failed validation.  Carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"scenario validation failed: {lines}")


class AssumptionViolation(ChemostatError):
    """Inputs fall outside the admissible model class.

    Raised e.g. when a growth law crosses its removal rate more than twice,
    or when a scan hits a non-finite value where the theory promises a
    finite one.
    """


class DegenerateError(AssumptionViolation):
    """Two or more break-even concentrations coincide within tolerance.

    The global-stability checkers refuse to run on such scenarios: they sit
    on a continuum of non-isolated equilibria.
    """


class InapplicableError(ChemostatError):
    """A checker's structural precondition is not met.

    E.g. the constant-yield corollary on a scenario with variable yields,
    or the single-species criterion on a multi-species scenario.
    """


class NumericError(ChemostatError):
    """A numerical routine failed to converge or lost its bracket."""


class StiffnessError(NumericError):
    """Integrator step size underflowed.  Carries the last state reached."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state
