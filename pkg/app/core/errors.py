"""Domain errors. Each carries the process exit code the CLI reports for it."""
from typing import Optional


class ImpulseBandError(Exception):
    exit_code = 3

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidConfig(ImpulseBandError):
    """Unreadable or malformed model file, flag or simulation config."""
    exit_code = 1


class ValidationFailed(ImpulseBandError):
    """The model violates an assumption the solver relies on."""
    exit_code = 2

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SolverError(ImpulseBandError):
    exit_code = 3


class QuadratureFailure(SolverError):
    pass


class DegenerateBand(SolverError):
    pass


class OutOfRange(SolverError):
    pass


class NoBracket(SolverError):
    pass


class ConvergenceFailure(SolverError):
    pass


class RegimeError(SolverError):
    pass


class InvariantViolation(SolverError):
    pass


class VerificationFailed(ImpulseBandError):
    exit_code = 4

    def __init__(self, message: str, failed_checks: Optional[list] = None):
        super().__init__(message)
        self.failed_checks = failed_checks or []
