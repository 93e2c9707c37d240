"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(ValueError):
    """A scenario violates a structural check or a standing hypothesis.

    ``tag`` carries the hypothesis label (``"H1"`` ... ``"H6"``) or a field
    location for parse-level problems.
    """

    def __init__(self, message, tag=None):
        super().__init__(message)
        self.tag = tag


class BoundViolation(RuntimeError):
    """Computed iterates broke an a priori bound derived from declared constants."""
