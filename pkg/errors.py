"""Exception hierarchy shared by every module of the toolkit."""


class WzToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 5


class ConfigError(WzToolkitError, ValueError):
    exit_code = 2


class BudgetExceeded(WzToolkitError):
    exit_code = 3

    def __init__(self, estimate: int, budget: int):
        super().__init__(f"Enumeration size {estimate} exceeds budget {budget}.")
        self.estimate = estimate
        self.budget = budget


# --- input validation ---

class NonStochasticRow(WzToolkitError, ValueError):
    pass


class NegativeEntry(WzToolkitError, ValueError):
    pass


class LengthMismatch(WzToolkitError, ValueError):
    pass


class LengthNotDivisible(WzToolkitError, ValueError):
    pass


class FactorizationError(WzToolkitError, ValueError):
    pass


class InfeasibleDelta(WzToolkitError, ValueError):
    pass


class EmptyGrid(WzToolkitError, ValueError):
    pass


# --- streams ---

class UnknownCodeword(WzToolkitError, ValueError):
    pass


class ParseFailure(WzToolkitError):
    pass


class HeaderMismatch(WzToolkitError):
    pass


class RankOverflow(WzToolkitError):
    pass


# --- size caps ---

class TableTooLarge(WzToolkitError):
    pass


class CapExceeded(WzToolkitError):
    pass


class CodebookTooLarge(WzToolkitError):
    pass


# --- outcomes ---

class NoTypicalMatch(WzToolkitError):
    pass


class NotAchievable(WzToolkitError):
    pass
