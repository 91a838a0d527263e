"""Exception hierarchy shared by all fragmc modules.

The CLI maps ``ParseError`` (and model validation failures at load time) to
exit code 2 and every other ``FragmcError`` to exit code 3.
"""

from __future__ import annotations


class FragmcError(Exception):
    """Base class for all errors raised by fragmc."""


# algebra


class AlgebraError(FragmcError):
    pass


class DivisionByZeroFunction(AlgebraError, ZeroDivisionError):
    """Division by the identically-zero rational function."""


class UnboundParameter(AlgebraError):
    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} has no value")
        self.name = name


class DenominatorVanishes(AlgebraError, ZeroDivisionError):
    """A denominator evaluates to zero at the requested point."""


# model


class ModelError(FragmcError):
    pass


class BadIndex(ModelError):
    pass


class ZeroTransitionStored(ModelError):
    pass


class RowSumViolation(ModelError):
    def __init__(self, state: int, residual):
        super().__init__(f"outgoing probabilities of state {state} sum to 1 + ({residual})")
        self.state = state
        self.residual = residual


class NegativeReward(ModelError):
    pass


class InvalidFragment(ModelError):
    pass


class UnknownLabel(ModelError):
    def __init__(self, name: str):
        super().__init__(f"unknown label {name!r}")
        self.name = name


# parsing


class ParseError(FragmcError):
    def __init__(self, line: int | None, message: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.message = message


class UnsupportedOperator(ParseError):
    pass


class OverlappingGuards(ParseError):
    def __init__(self, state: int | str, detail: str = ""):
        msg = f"more than one command enabled in state {state}"
        super().__init__(None, msg + (f" ({detail})" if detail else ""))
        self.state = state


class UnboundedVariable(ParseError):
    pass


class UnreachableInit(ParseError):
    pass


# analysis


class AnalysisError(FragmcError):
    pass


class EmptyTargetSet(AnalysisError):
    pass


class BudgetExceeded(AnalysisError):
    pass


class InfiniteReward(AnalysisError):
    pass


class UnknownRewardStructure(AnalysisError):
    def __init__(self, name: str):
        super().__init__(f"unknown reward structure {name!r}")
        self.name = name


class UnsupportedProperty(AnalysisError):
    pass


class InadmissibleValuation(AnalysisError):
    def __init__(self, state: int | None, detail: str):
        where = f"state {state}: " if state is not None else ""
        super().__init__(where + detail)
        self.state = state
        self.detail = detail


class InvalidSummary(AnalysisError):
    pass


class MissingTargetState(AnalysisError):
    pass
