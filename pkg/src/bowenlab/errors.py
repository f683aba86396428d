"""Exception hierarchy shared by every module."""


class BowenLabError(Exception):
    """Base class for all library errors."""


class NumericalFailure(BowenLabError):
    """A computation broke down numerically (CLI exit status 3)."""


class InfeasibleConfig(BowenLabError):
    """A requested construction cannot be realised (CLI exit status 2)."""


class NoConvergence(NumericalFailure):
    pass


class DerivativeVanished(NumericalFailure):
    pass


class NonFiniteValue(NumericalFailure):
    pass


class PoleHit(NumericalFailure):
    pass


class WordBudgetExceeded(NumericalFailure):
    pass


class NoSignChange(NumericalFailure):
    pass


class DomainError(BowenLabError, ValueError):
    pass


class Unsupported(BowenLabError):
    pass


class InsufficientData(BowenLabError):
    pass


class InvalidAddress(BowenLabError, IndexError):
    pass


class BranchDomainInvalid(InfeasibleConfig):
    pass


class ConfigInfeasible(InfeasibleConfig):
    pass


class ScheduleInfeasible(InfeasibleConfig):
    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


class NotSupercritical(InfeasibleConfig):
    pass
