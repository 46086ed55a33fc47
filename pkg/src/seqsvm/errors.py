"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new failure modes should
reuse one of the existing categories instead of raising bare ValueError.
"""


class SeqsvmError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(SeqsvmError):
    """Invalid or contradictory configuration (unknown key, bad range, mode mismatch)."""


class DataError(SeqsvmError):
    """Malformed or unusable input data."""


class InsufficientDataError(DataError):
    """Not enough items (or items of one class) to perform the requested operation."""


class DegenerateLabelsError(DataError):
    """An evaluation was asked for but only one class is present."""


class ValidationError(SeqsvmError):
    """A numerical precondition failed (asymmetric gram, infeasible multipliers, ...)."""


class StepFailureError(SeqsvmError):
    """A manifold update could not be computed; callers may retry with a smaller rate."""


class NoMarginVectorError(SeqsvmError):
    """Offset recovery found no multiplier strictly inside the box constraints."""


class DivergenceError(SeqsvmError):
    """Training produced a non-finite objective."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
