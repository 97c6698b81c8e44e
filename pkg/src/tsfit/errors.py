"""Exception hierarchy shared by every tsfit module."""


class TsfitError(Exception):
    """Base class for all library errors (the CLI maps these to exit code 1)."""


class DomainError(TsfitError, ValueError):
    """An argument lies outside the domain of the operation."""


class IngestionError(DomainError):
    """Input file could not be turned into a regular series."""


class NumericalFailure(TsfitError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite output."""


class SingularMomentMatrixError(NumericalFailure):
    """A block-Toeplitz moment system could not be solved."""

    def __init__(self, message, order=None, condition=None):
        super().__init__(message)
        self.order = order
        self.condition = condition


class DegeneracyError(NumericalFailure):
    """A recursion hit a singular or non-positive innovation variance."""

    def __init__(self, message, step=None, condition=None):
        super().__init__(message)
        self.step = step
        self.condition = condition


class ContractViolation(TsfitError):
    """A kernel needs more history than the partition padding provides."""


class StepSizeError(NumericalFailure):
    """Gradient ascent diverged under a fixed step size."""
