"""Exception hierarchy shared by the solvers, monitors and CLI."""


class SymplexError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SymplexError, ValueError):
    """A solver or problem parameter violates its admissible range."""


class InfeasibleError(SymplexError, ValueError):
    """An input point lies outside the feasible set.

    ``violation`` carries the magnitude by which feasibility failed.
    """

    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class DivergenceError(SymplexError, RuntimeError):
    """An iterate became non-finite or exceeded the divergence radius.

    ``state`` is the last state whose entries were all finite.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InvariantViolation(SymplexError, RuntimeError):
    """A runtime invariant of an algorithm was broken (e.g. step size left its interval)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class LineSearchExhausted(SymplexError, RuntimeError):
    """No trial passed the acceptance test within the backtracking budget."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
