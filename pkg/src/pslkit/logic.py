"""Core soft-logic algebra: predicates, rules, interpretations, Lukasiewicz operators.

Truth values live in [0, 1]. The operators are polymorphic over anything
supporting +, -, and comparison (floats for production use, fractions.Fraction
when exact arithmetic is wanted in tests). Everything in this module is
immutable after construction and all operations are pure functions.
"""

from dataclasses import dataclass, field
from typing import Union

from .errors import DomainError, MissingAtomError

# Distinguished rule weight for hard constraints (lambda = infinity).
HARD = float("inf")

OPEN = "open"
CLOSED = "closed"


def _check_unit(value, name: str = "value"):
    if not (0 <= value <= 1):
        raise DomainError(f"{name} {value!r} outside [0, 1]")
    return value


def luk_and(p, q):
    """Lukasiewicz t-norm: max(0, p + q - 1)."""
    _check_unit(p, "p")
    _check_unit(q, "q")
    return max(0, p + q - 1)


def luk_or(p, q):
    """Lukasiewicz t-conorm: min(p + q, 1)."""
    _check_unit(p, "p")
    _check_unit(q, "q")
    return min(p + q, 1)


def luk_not(p):
    """Lukasiewicz negator: 1 - p."""
    _check_unit(p, "p")
    return 1 - p


@dataclass(frozen=True)
class Variable:
    """A logic variable; identifiers starting uppercase in the rule language."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Constant:
    """A domain constant (user id, page id, characteristic code, ...)."""

    value: str

    def __str__(self):
        return self.value


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class PredicateDecl:
    """Declaration of a predicate symbol with arity and closure.

    Closed predicates default every unlisted ground atom to value 0;
    unlisted atoms of open predicates are inference targets unless given
    as evidence.
    """

    symbol: str
    arity: int
    closure: str = CLOSED

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"predicate {self.symbol}: arity must be >= 1")
        if self.closure not in (OPEN, CLOSED):
            raise ValueError(f"predicate {self.symbol}: closure must be open or closed")

    @property
    def closed(self) -> bool:
        return self.closure == CLOSED


@dataclass(frozen=True)
class Literal:
    """A possibly negated predicate applied to terms."""

    predicate: PredicateDecl
    args: tuple
    negated: bool = False

    def __post_init__(self):
        if len(self.args) != self.predicate.arity:
            raise ValueError(
                f"{self.predicate.symbol} expects {self.predicate.arity} args, "
                f"got {len(self.args)}"
            )

    @property
    def variables(self) -> frozenset:
        return frozenset(t.name for t in self.args if isinstance(t, Variable))

    def is_ground(self) -> bool:
        return all(isinstance(t, Constant) for t in self.args)

    def ground_atom(self) -> "GroundAtom":
        if not self.is_ground():
            raise ValueError(f"literal {self} is not ground")
        return GroundAtom(self.predicate.symbol, tuple(t.value for t in self.args))

    def __str__(self):
        inner = f"{self.predicate.symbol}({', '.join(map(str, self.args))})"
        return f"!{inner}" if self.negated else inner


@dataclass(frozen=True)
class Rule:
    """A weighted implication: weight : B1 & ... & Bm -> H.

    The weight is a nonnegative real, or HARD for an inviolable constraint.
    The exponent selects linear (1) or squared (2) hinge potentials. Every
    head variable must also occur in the body (range restriction), otherwise
    grounding would be unbounded.
    """

    weight: float
    body: tuple
    head: Literal
    exponent: int = 1

    def __post_init__(self):
        if not (self.weight >= 0):
            raise ValueError(f"rule weight must be >= 0 or HARD, got {self.weight}")
        if self.exponent not in (1, 2):
            raise ValueError(f"rule exponent must be 1 or 2, got {self.exponent}")
        if len(self.body) == 0:
            raise ValueError("rule body must be nonempty")
        bound = frozenset().union(*(lit.variables for lit in self.body))
        unbound = self.head.variables - bound
        if unbound:
            raise ValueError(
                f"head variable(s) {sorted(unbound)} do not appear in the body"
            )

    @property
    def is_hard(self) -> bool:
        return self.weight == HARD

    def __str__(self):
        w = "hard" if self.is_hard else repr(self.weight)
        body = " & ".join(map(str, self.body))
        suffix = " ^2" if self.exponent == 2 else ""
        return f"{w} : {body} -> {self.head}{suffix}"


@dataclass(frozen=True, order=True)
class GroundAtom:
    """A predicate symbol applied to constants only.

    Ordering is lexicographic on (predicate, args) so that sets of ground
    atoms are deterministically iterable.
    """

    predicate: str
    args: tuple

    def __str__(self):
        return f"{self.predicate}({', '.join(self.args)})"


class Interpretation:
    """A read-only mapping from ground atoms to truth values in [0, 1]."""

    __slots__ = ("_values",)

    def __init__(self, values=()):
        mapping = dict(values)
        for atom, v in mapping.items():
            _check_unit(v, str(atom))
        object.__setattr__(self, "_values", mapping)

    def __getitem__(self, atom: GroundAtom):
        return self._values[atom]

    def __contains__(self, atom: GroundAtom) -> bool:
        return atom in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self):
        return iter(sorted(self._values))

    def get(self, atom: GroundAtom, default=None):
        return self._values.get(atom, default)

    def items(self):
        return self._values.items()

    def __eq__(self, other):
        if isinstance(other, Interpretation):
            return self._values == other._values
        return NotImplemented

    def __repr__(self):
        return f"Interpretation({len(self._values)} atoms)"


def literal_value(lit: Literal, interp: Interpretation):
    """Value of a ground literal under an interpretation.

    Returns I(atom) for a positive literal and 1 - I(atom) for a negated one.
    Atoms absent from the interpretation raise MissingAtomError; closed-world
    defaulting is the grounder's job, not this function's.
    """
    atom = lit.ground_atom()
    try:
        v = interp[atom]
    except KeyError:
        raise MissingAtomError(str(atom)) from None
    return 1 - v if lit.negated else v


def body_value(body, interp: Interpretation):
    """Chained Lukasiewicz conjunction of the body literal values.

    Uses the closed form max(0, sum(v_i) - (m - 1)), which equals the
    literal-by-literal fold because the t-norm is associative.
    """
    total = 0
    for lit in body:
        total = total + literal_value(lit, interp)
    return max(0, total - (len(body) - 1))


def distance_to_satisfaction(rule: Rule, interp: Interpretation):
    """How far an interpretation is from satisfying a ground rule.

    max(0, I(body) - I(head)); the outer clamp makes satisfied rules
    contribute exactly 0. Piecewise linear and convex in every atom value.
    """
    return max(0, body_value(rule.body, interp) - literal_value(rule.head, interp))
