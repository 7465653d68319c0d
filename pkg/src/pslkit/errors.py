"""Exception hierarchy shared across the package."""


class PslError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PslError, ValueError):
    """A truth value fell outside the closed unit interval."""


class MissingAtomError(PslError, KeyError):
    """A ground atom could not be resolved against an interpretation."""


class ModelSyntaxError(PslError, ValueError):
    """Rejection of a model file, with a source position.

    Covers both lexical/grammatical errors and semantic ones (undeclared
    predicate, arity mismatch, unbound head variable, negative weight,
    duplicate declaration); every instance points inside the offending token.
    """

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class DataError(PslError, ValueError):
    """Malformed or inconsistent evidence, target, score, or gold data."""


class GroundingCapError(PslError, RuntimeError):
    """The grounding produced more potentials than the configured cap."""


class CapabilityError(PslError, RuntimeError):
    """A solver method was asked to do something outside its design limits."""


class NumericError(PslError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""
