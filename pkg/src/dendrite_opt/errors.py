"""Exception hierarchy shared by the numerics and the CLI exit codes."""


class ConfigError(ValueError):
    """Invalid or infeasible configuration (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A solver failed or produced an inconsistent result (CLI exit code 3)."""


class EigenSolverError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TruncationError(NumericalError):
    """Modal truncation left a non-positive far-end integral."""
