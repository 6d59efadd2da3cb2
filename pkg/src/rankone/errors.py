"""Exception types raised across the package."""


class RankOneError(Exception):
    """Base class for all package errors."""


class DimensionError(RankOneError, ValueError):
    """Operands have incompatible shapes."""


class DomainError(RankOneError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceGuardError(RankOneError, ValueError):
    """An explicit tensor construction would exceed the size guard."""


class ConvergenceError(RankOneError, ArithmeticError):
    """An iterative numerical routine hit its iteration cap.

    The last residual is kept on ``residual`` for diagnostics.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DesignConstructionError(RankOneError, RuntimeError):
    """Weight fitting did not reach the requested design accuracy."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class FormatError(RankOneError, ValueError):
    """A serialized file is malformed; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigError(RankOneError, ValueError):
    """An experiment configuration failed validation."""
