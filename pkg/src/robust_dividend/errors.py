"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RobustDividendError(Exception):
    exit_code = 1


class ValidationError(RobustDividendError, ValueError):
    """Invalid parameters or inputs (bad domain, inconsistent config)."""

    exit_code = 2


class ConvergenceError(RobustDividendError, RuntimeError):
    """The shooting solve did not reach its residual tolerance."""

    exit_code = 3

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NumericalBlowupError(ConvergenceError):
    """Non-finite state in the Cauchy integration."""


class SimulationConfigError(RobustDividendError, ValueError):
    exit_code = 4
