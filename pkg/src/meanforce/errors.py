"""Exception types shared across the package."""


class MeanforceError(Exception):
    """Base class for all package errors."""


class ValidationError(MeanforceError, ValueError):
    """Input fails a structural precondition (shape, hermiticity, config)."""


class DomainError(MeanforceError, ValueError):
    """Arguments are outside the mathematical domain of the operation."""


class PoleError(DomainError):
    """Evaluation requested exactly on a pole of the integrand."""


class NearDegenerateError(DomainError):
    """Frequency pair too close for a thermal-denominator formula."""


class DetailedBalanceError(ValidationError):
    """Kossakowski diagonal violates detailed balance beyond tolerance."""


class ConsistencyError(MeanforceError, RuntimeError):
    """A computed object violates an invariant it is required to satisfy."""


class NumericsError(MeanforceError, RuntimeError):
    """Quadrature or linear-algebra routine failed to reach its target."""


class DegenerateSteadyStateError(NumericsError):
    """Generator null space has dimension > 1; no unique steady state."""


class ResourceError(MeanforceError, RuntimeError):
    """Requested computation exceeds a hard size guard."""
