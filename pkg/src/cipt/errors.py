"""Exception types used across the package."""


class CiptError(Exception):
    """Base class for package errors."""


class ParameterError(CiptError, ValueError):
    """Invalid or inconsistent parameters."""


class CapacityError(CiptError):
    """Requested system size exceeds an implementation cap."""


class NumericalIntegrityError(CiptError):
    """A numerical sanity check failed (norm drift, non-stochastic row, ...)."""


class FormatError(CiptError):
    """Malformed serialized record."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedVersionError(FormatError):
    """Serialized record has an unknown format version."""


class SchemaError(CiptError):
    """CSV/JSON schema name or version mismatch between producer and consumer."""


class InsufficientDataError(CiptError):
    """Not enough points/samples for the requested estimate."""


class SingularLossError(CiptError):
    """Collapse loss is singular (coincident x with mismatched y and zero sigma)."""


class FitFailureError(CiptError):
    """Fit did not converge; carries the best candidate seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EstimationError(CiptError):
    """An estimator could not produce a value (e.g. too few valid windows)."""


class ConvergenceWarning(UserWarning):
    """Estimate finished but did not reach the requested statistical tolerance."""
