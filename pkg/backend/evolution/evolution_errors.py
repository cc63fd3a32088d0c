"""
Error hierarchy shared by every evolution module.

Checkers report failing properties through verdicts, not exceptions. The
exceptions below signal misuse, exhausted search budgets and failed
constructions.
"""

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


class EvolutionError(Exception):
    """Base class for all evolution errors"""

    exit_code = EXIT_USAGE

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


class NonComposable(EvolutionError):
    """Raised when the codomain of one arrow is not the domain of the next"""


class BudgetExceeded(EvolutionError):
    """A search hit its configured cap; the answer is unknown, not negative"""

    exit_code = EXIT_UNKNOWN

    def __init__(self, budget_name, limit, message=None, **details):
        super().__init__(message or f"{budget_name} exhausted at {limit}", **details)
        self.budget_name = budget_name
        self.limit = limit

    def to_dict(self):
        data = super().to_dict()
        data["budget"] = {"name": self.budget_name, "limit": self.limit}
        return data


class AmalgamationFailed(EvolutionError):
    """A TAP square could not be closed"""

    exit_code = EXIT_FALSE

    def __init__(self, message, square=None, **details):
        super().__init__(message, square=square, **details)
        self.square = square


class AbsorptionFailed(EvolutionError):
    """A zigzag or ladder round found no absorbing stage"""

    exit_code = EXIT_FALSE

    def __init__(self, message, round_index=None, **details):
        super().__init__(message, round=round_index, **details)
        self.round_index = round_index


class IllegalMove(EvolutionError):
    """A strategy returned an arrow that is not a transition from the frontier"""

    exit_code = EXIT_FALSE

    def __init__(self, message, player=None, cause=None, **details):
        super().__init__(message, player=player, **details)
        self.player = player
        self.cause = cause


class InvalidMatch(EvolutionError):
    """A DPO match failed re-validation"""


class NoNormalizedObject(EvolutionError):
    """The explored fragment has no normalized object"""

    exit_code = EXIT_FALSE


class CostOverflow(EvolutionError):
    """Accumulated transition cost left the 64-bit range"""


class ConfigError(EvolutionError):
    """Invalid run configuration or unreadable input"""
