"""Exception hierarchy. The CLI maps these onto exit codes."""


class HawkesError(Exception):
    """Base class for package errors."""


class DomainError(HawkesError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidParameterError(HawkesError, ValueError):
    """Model parameters violate a hard constraint."""


class InvalidSpecError(InvalidParameterError):
    """A baseline or model specification is malformed."""


class DataError(HawkesError, ValueError):
    """Event data are malformed (unsorted, duplicated, out of range)."""


class NumericFailure(HawkesError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ExplosionError(NumericFailure):
    """Simulation exceeded the runaway-growth guard."""


class EnvelopeViolation(NumericFailure):
    """The thinning envelope fell below the true intensity."""


class IllConditionedError(NumericFailure):
    """Observed information too ill-conditioned to invert."""

    def __init__(self, message, condition_number):
        super().__init__(message, achieved=condition_number)
        self.condition_number = condition_number


class StudyFailure(NumericFailure):
    """More than the allowed fraction of replicate fits failed at some scale."""
