"""Exception types shared across the package."""


class MminrError(Exception):
    """Base class for all package-specific errors."""


class DataIntegrityError(MminrError, ValueError):
    """Raised when radar data violates a physical constraint (negative rain,
    non-finite cells, inconsistent frame shapes)."""


class ConfigurationError(MminrError, ValueError):
    """Raised when a model or pipeline configuration is internally
    inconsistent or incompatible with its input."""


class ArchiveError(MminrError, ValueError):
    """Raised when a sequence archive on disk is missing, malformed, or
    inconsistent with its manifest."""


class TrainingDivergedError(MminrError, RuntimeError):
    """Raised when the optimization loss becomes non-finite."""
