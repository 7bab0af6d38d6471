"""Exception hierarchy shared by the whole package."""


class CarmaError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CarmaError):
    """Lexical or syntactic error with a source position."""

    def __init__(self, message, line, column):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class ModelError(CarmaError):
    """Semantic error in a model (bad structure, bad rule, bad measure)."""


class EvalError(ModelError):
    """Error raised while evaluating an expression or predicate."""


class UnboundNameError(EvalError):
    """A name could not be resolved in the current scope."""


class TypeMismatchError(EvalError):
    """Operands of an operator have incompatible kinds."""


class DivisionByZeroError(EvalError):
    """Division (or modulo) by zero during expression evaluation."""


class ArityMismatchError(EvalError):
    """Substitution or reception with mismatched variable/value counts."""
