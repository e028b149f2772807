"""Exception hierarchy shared by the numerical modules and the CLI."""

from __future__ import annotations


class WsMoireError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class ConfigError(WsMoireError, ValueError):
    exit_code = 2


class SpecError(WsMoireError, ValueError):
    """Invalid lattice/potential/parameter specification."""

    exit_code = 2


class SiteIndexError(WsMoireError, IndexError):
    exit_code = 3


class DomainError(WsMoireError, ValueError):
    """Argument outside the domain of a closed-form expression."""


class PreconditionError(WsMoireError, ValueError):
    """Operation called on an input it is not defined for."""


class SizeError(PreconditionError):
    pass


class ConvergenceError(WsMoireError, ArithmeticError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SymmetryViolationError(WsMoireError, ArithmeticError):
    pass


class NumericError(WsMoireError, ArithmeticError):
    pass


class ConditioningError(WsMoireError, ArithmeticError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class GrowthOverflowError(WsMoireError, OverflowError):
    def __init__(self, message: str, time_reached: float):
        super().__init__(message)
        self.time_reached = time_reached


class AnalysisError(WsMoireError, RuntimeError):
    pass


class DataError(WsMoireError, ValueError):
    pass


class GridPointError(WsMoireError):
    """A phase-diagram cell failed; carries the grid coordinates."""

    def __init__(self, message: str, j_over_omega: float, beta_over_omega: float):
        super().__init__(message)
        self.j_over_omega = j_over_omega
        self.beta_over_omega = beta_over_omega
