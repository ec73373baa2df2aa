"""Exception types shared across the package."""


class FlockstabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FlockstabError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class CoincidentParticlesError(DomainError):
    """Two particles occupy (numerically) the same position."""


class DivergenceError(FlockstabError, RuntimeError):
    """Time integration produced a non-finite state.

    Attributes:
        step: index of the first step at which a non-finite value appeared.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class SolverConvergenceError(FlockstabError, RuntimeError):
    """An iterative solver exceeded its iteration budget."""


class NonConvergenceError(FlockstabError, RuntimeError):
    """A stationary-state search did not reach the requested residual."""


class DiagnosticError(FlockstabError, RuntimeError):
    """Two independent numerical checks disagree (tolerance artifact)."""


class ConfigError(FlockstabError, ValueError):
    """A run configuration is malformed or inconsistent."""
