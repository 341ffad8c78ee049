"""Exception hierarchy. Each class carries a category and a CLI exit code."""


class DegCtrlError(Exception):
    category = "error"
    exit_code = 1


class InvalidArgument(DegCtrlError, ValueError):
    category = "invalid-argument"
    exit_code = 3


class ConfigError(InvalidArgument):
    category = "config"
    exit_code = 3


class DomainError(InvalidArgument):
    category = "domain"
    exit_code = 3


class UnsupportedParameter(InvalidArgument):
    category = "unsupported-parameter"
    exit_code = 3


class SingularIntegralError(DegCtrlError, ArithmeticError):
    category = "singular-integral"
    exit_code = 4


class HypothesisViolated(DegCtrlError):
    category = "hypothesis-violated"
    exit_code = 5


class ConvergenceFailure(DegCtrlError):
    category = "convergence-failure"
    exit_code = 6

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularSystemError(DegCtrlError, ArithmeticError):
    category = "singular-system"
    exit_code = 7


class HypothesisWarning(UserWarning):
    """A structural assumption is not met; the computation still runs."""
