from typing import Any, Optional

EXIT_OK = 0
EXIT_INAPPLICABLE = 1
EXIT_INPUT_ERROR = 2
EXIT_VERIFICATION_FAILED = 3


class SLBoundsError(Exception):
    """Base error; `exit_code` is what the CLI returns when it escapes a command."""

    exit_code: int = EXIT_INPUT_ERROR

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ExpressionSyntaxError(SLBoundsError):
    def __init__(self, detail: str, offset: int):
        super().__init__(f"{detail} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class ArityError(ExpressionSyntaxError):
    def __init__(self, name: str, expected: str, got: int, offset: int):
        super().__init__(f"{name}() takes {expected} argument(s), got {got}", offset)
        self.name = name


class PoleEvaluationError(SLBoundsError):
    def __init__(self, x: float):
        super().__init__(f"expression has a pole at x={x!r}")
        self.x = x


class CoefficientEvaluationError(SLBoundsError):
    def __init__(self, name: str, x: float):
        super().__init__(f"coefficient {name} is not finite at x={x!r}")
        self.name = name
        self.x = x


class QuadratureError(SLBoundsError):
    def __init__(self, detail: str, value: float = 0.0, error: float = 0.0):
        super().__init__(detail)
        self.value = value
        self.error = error


class InvalidExponentError(SLBoundsError):
    pass


class ProblemFileError(SLBoundsError):
    pass


class InfeasibleError(SLBoundsError):
    exit_code = EXIT_INAPPLICABLE


class OracleError(SLBoundsError):
    exit_code = EXIT_VERIFICATION_FAILED

    def __init__(self, detail: str, history: Optional[list] = None):
        super().__init__(detail)
        self.history = history or []


class HypothesisError(SLBoundsError):
    def __init__(self, report: Any):
        super().__init__("coefficient hypotheses are not satisfied")
        self.report = report
