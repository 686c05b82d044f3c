"""Exception types shared across the package."""


class MsglonError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MsglonError, ValueError):
    """Structurally invalid input: bad shapes, out-of-range fields, broken files."""


class IoError(MsglonError, OSError):
    """Raised when reading or writing an artifact fails."""


class CapabilityError(MsglonError, RuntimeError):
    """Request exceeds what the implementation supports (e.g. Sobol' dimension)."""
