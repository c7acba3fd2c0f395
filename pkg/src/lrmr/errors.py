"""Exception types shared across the package."""

__all__ = ["DomainError", "UnstableRecurrenceError"]


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on.

    Raised for bad dimensions, rank-deficient systems, invalid configuration
    values, and similar caller errors. The CLI maps this to exit code 1.
    """


class UnstableRecurrenceError(DomainError):
    """An impulse-sequence recurrence overflowed.

    The coefficient vector describes an unstable recurrence whose sequence
    exceeded the overflow guard before the requested length was reached.
    """
