"""Exception types shared across the package."""


class HdgError(Exception):
    """Base class for all package errors."""


class ConfigError(HdgError):
    """Invalid configuration or incompatible problem setup."""


class MeshFormatError(HdgError):
    """Malformed mesh file. Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TopologyError(HdgError):
    """Non-conforming or degenerate mesh connectivity."""


class AssemblyError(HdgError):
    """Problem data rejected during assembly (bad coefficients, degenerate cells)."""


class SolverError(HdgError):
    """Factorization failure or residual tolerance not met."""


class ProjectionError(HdgError):
    """Singular local projection system."""
