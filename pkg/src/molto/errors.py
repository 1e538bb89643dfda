"""Exception types shared across the package."""


class MoltoError(Exception):
    """Base class for package errors."""


class InvalidArgument(MoltoError, ValueError):
    """An argument violates a documented precondition."""


class TagMatchError(MoltoError, ValueError):
    """A boundary region matched no edges (would silently drop loads/supports)."""


class SingularSystemError(MoltoError, RuntimeError):
    """Assembled system has no constraint at all and cannot be solved."""


class SolverFailure(MoltoError, RuntimeError):
    """A linear solve did not reach the required residual."""


class DegenerateSensitivityError(MoltoError, RuntimeError):
    """A sensitivity field is non-finite; the perturbation cannot be formed."""


class ConfigError(MoltoError, ValueError):
    """Configuration file is malformed or violates the schema."""
