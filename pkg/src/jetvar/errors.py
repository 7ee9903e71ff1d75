"""Exception hierarchy shared by every module."""


class JetvarError(Exception):
    """Base class for all errors raised by jetvar."""


class UsageError(JetvarError, ValueError):
    """Arguments are structurally incompatible (shape mismatch, bad index, ...)."""


class SingularityError(JetvarError, ArithmeticError):
    """Division by a non-unit or evaluation outside a function's domain."""


class DomainError(SingularityError):
    """A point lies outside the chart on which a preset is defined."""


class HolonomyError(JetvarError, ValueError):
    """An operation that needs a holonomic argument received a non-holonomic one."""


class PairingDomainError(JetvarError, ValueError):
    """Two elements were paired over different base points."""


class DegenerateLagrangianError(JetvarError, ArithmeticError):
    """The Hessian in the top-order velocities is singular."""


class ConvergenceError(JetvarError, RuntimeError):
    """An iterative method failed to reach its tolerance.

    ``best_residual`` carries the smallest residual norm seen.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class ParseError(JetvarError, ValueError):
    """Malformed expression source; carries a 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ConfigError(JetvarError, ValueError):
    """Invalid or inconsistent problem configuration."""
