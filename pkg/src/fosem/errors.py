"""Exception types shared across the package."""


class FosemError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(FosemError, ValueError):
    """Curve or emulator parameters outside their domain (non-finite, wrong sign)."""


class DataValidationError(FosemError, ValueError):
    """Input data failed validation (short series, misaligned grids, bad files)."""


class NumericalError(FosemError, RuntimeError):
    """A numerical operation failed (factorisation, non-finite posterior)."""
