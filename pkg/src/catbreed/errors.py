"""Exception hierarchy shared across the package."""


class CatBreedError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(CatBreedError, ValueError):
    """An argument is outside the domain where the operation is defined."""

    exit_code = 3


class TruncationError(DomainError):
    """The Fock cutoff is too small to hold the requested state."""


class DegenerateWindowError(DomainError):
    """A conditioning window accepts (almost) nothing."""


class ValidationError(DomainError):
    """An input object violates its invariants (e.g. not a density matrix)."""


class DegreeOverflowError(DomainError):
    """A polynomial-times-Gaussian representation exceeded its degree cap."""


class AccuracyError(CatBreedError, ArithmeticError):
    """A numerical procedure failed to reach the requested accuracy."""

    exit_code = 4

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EnvelopeError(AccuracyError):
    """Rejection sampling found a point above its envelope."""


class OutputError(CatBreedError, OSError):
    """Reading or writing a file failed."""

    exit_code = 5
