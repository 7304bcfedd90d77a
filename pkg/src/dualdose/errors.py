"""Exception types shared across the package."""


class DualDoseError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DualDoseError, ValueError):
    """A value violates a mathematical precondition (range, shape, order)."""


class ConfigurationError(DualDoseError, ValueError):
    """A configuration object holds an invalid combination of settings."""


class ProtocolError(DualDoseError):
    """An operation was applied to a trial in a state that forbids it."""


class SearchFailure(DualDoseError):
    """A hyperparameter search found no feasible candidate.

    Attributes:
        best_candidate: the closest-to-feasible candidate examined, or None.
        best_distance: that candidate's distance from the feasibility targets.
    """

    def __init__(self, message, best_candidate=None, best_distance=None):
        super().__init__(message)
        self.best_candidate = best_candidate
        self.best_distance = best_distance
