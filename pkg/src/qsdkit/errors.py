"""Exception hierarchy shared by all qsdkit modules."""


class QsdError(Exception):
    """Base class for every error raised by qsdkit."""


class ChainError(QsdError):
    """Structural problem with a transition matrix.

    ``violations`` holds ``(row, column, value)`` triples; ``column`` is
    ``None`` for row-level problems such as an excessive row sum.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class ConvergenceError(QsdError):
    """An iterative eigen-solver did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class HypothesisError(QsdError):
    """A hypothesis of a composition theorem failed on the given input.

    ``hypothesis`` names the failed condition and ``where`` identifies the
    offending class or state when one is known.
    """

    def __init__(self, message, hypothesis=None, where=None):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.where = where


class OperatorFitError(QsdError):
    """fit_H could not identify a polynomial limit for an operator."""


class RuleSyntaxError(QsdError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}, column {column}: "
        elif column is not None:
            loc = f"column {column}: "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class EvaluationError(QsdError):
    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} (at x={x})")
        self.x = x
