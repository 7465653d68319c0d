"""Parser and renderer for the textual model format (.psl files).

One declaration or rule per line. Identifiers starting uppercase are
variables; identifiers starting lowercase, digits, or double-quoted strings
are constants. `!` negates, `&` conjoins, `->` implies, a trailing `^2`
squares the potential, `hard :` marks an inviolable rule, and `#` starts a
comment running to end of line.

    predicate Is/2 : open
    predicate Predicts/3 : closed
    1.0 : Predicts(U, C, txt) -> Is(U, C)
    hard : Is(U, fem) -> Is(U, fem)

Parsing is deterministic and locale-independent; render_model produces text
that parses back to a structurally equal ModelFile.
"""

import re
from dataclasses import dataclass, field
from decimal import Decimal

from .errors import ModelSyntaxError
from .logic import (
    CLOSED,
    HARD,
    OPEN,
    Constant,
    Literal,
    PredicateDecl,
    Rule,
    Variable,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ARROW>->)
  | (?P<NUMBER>\d+\.\d*|\.\d+)
  | (?P<NUMWORD>\d\w*)
  | (?P<WORD>[A-Za-z_]\w*)
  | (?P<STRING>"[^"]*")
  | (?P<PUNCT>[/:(),&!^])
  | (?P<MINUS>-)
  | (?P<BADSTRING>")
    """,
    re.VERBOSE,
)

_BARE_CONSTANT_RE = re.compile(r"[a-z0-9_]\w*")


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


@dataclass(frozen=True)
class ModelFile:
    """A validated model: predicate declarations plus weighted rules.

    Source locations (1-based line/column per element) are kept for
    diagnostics only and do not take part in equality.
    """

    declarations: tuple
    rules: tuple
    decl_locations: tuple = field(default=(), compare=False, repr=False)
    rule_locations: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        seen = set()
        for decl in self.declarations:
            if decl.symbol in seen:
                raise ValueError(f"duplicate predicate declaration {decl.symbol}")
            seen.add(decl.symbol)
        by_symbol = {d.symbol: d for d in self.declarations}
        for rule in self.rules:
            for lit in (*rule.body, rule.head):
                declared = by_symbol.get(lit.predicate.symbol)
                if declared is None or declared != lit.predicate:
                    raise ValueError(
                        f"rule uses undeclared predicate {lit.predicate.symbol}"
                    )

    def predicate(self, symbol: str) -> PredicateDecl:
        for decl in self.declarations:
            if decl.symbol == symbol:
                return decl
        raise KeyError(symbol)


def _tokenize_line(text: str, line_no: int):
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch in " \t\r":
            pos += 1
            continue
        if ch == "#":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {ch!r}", line_no, pos + 1)
        kind = m.lastgroup
        if kind == "BADSTRING":
            raise ModelSyntaxError("unterminated string constant", line_no, pos + 1)
        tokens.append(_Token(kind, m.group(), line_no, pos + 1))
        pos = m.end()
    return tokens


class _LineParser:
    def __init__(self, tokens, line_no: int, line_len: int):
        self.tokens = tokens
        self.line_no = line_no
        self.line_len = line_len
        self.i = 0

    def error(self, message: str, token=None):
        if token is None:
            token = self.peek()
        if token is None:
            raise ModelSyntaxError(message, self.line_no, self.line_len + 1)
        raise ModelSyntaxError(message, token.line, token.column)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, expect_kind=None, expect_value=None, what="token"):
        tok = self.peek()
        if tok is None:
            self.error(f"expected {what}, found end of line")
        if expect_kind is not None and tok.kind != expect_kind:
            self.error(f"expected {what}, found {tok.value!r}", tok)
        if expect_value is not None and tok.value != expect_value:
            self.error(f"expected {expect_value!r}, found {tok.value!r}", tok)
        self.i += 1
        return tok

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)


def _parse_declaration(p: _LineParser):
    p.next("WORD", "predicate")
    name = p.next("WORD", what="predicate name")
    p.next("PUNCT", "/", what="'/'")
    arity_tok = p.next(what="arity")
    if arity_tok.kind != "NUMWORD" or not arity_tok.value.isdigit():
        p.error("expected a positive integer arity", arity_tok)
    arity = int(arity_tok.value)
    if arity < 1:
        p.error("arity must be >= 1", arity_tok)
    p.next("PUNCT", ":", what="':'")
    closure_tok = p.next("WORD", what="'open' or 'closed'")
    if closure_tok.value not in (OPEN, CLOSED):
        p.error("closure must be 'open' or 'closed'", closure_tok)
    if not p.at_end():
        p.error("unexpected trailing input after declaration")
    return PredicateDecl(name.value, arity, closure_tok.value), name


def _parse_weight(p: _LineParser):
    tok = p.peek()
    if tok is None:
        p.error("expected a rule weight")
    if tok.kind == "MINUS":
        p.error("rule weight must be nonnegative", tok)
    if tok.kind == "WORD" and tok.value == "hard":
        p.next()
        return HARD, tok
    if tok.kind in ("NUMBER", "NUMWORD"):
        try:
            weight = float(tok.value)
        except ValueError:
            p.error("invalid rule weight", tok)
        p.next()
        return weight, tok
    p.error("expected a rule weight", tok)


def _parse_term(p: _LineParser):
    tok = p.next(what="a term")
    if tok.kind == "WORD":
        if tok.value[0].isupper():
            return Variable(tok.value)
        return Constant(tok.value)
    if tok.kind == "NUMWORD":
        return Constant(tok.value)
    if tok.kind == "STRING":
        return Constant(tok.value[1:-1])
    p.error("expected a variable or constant", tok)


def _parse_literal(p: _LineParser, predicates: dict) -> Literal:
    negated = False
    tok = p.peek()
    if tok is not None and tok.value == "!":
        p.next()
        negated = True
    name = p.next("WORD", what="a predicate name")
    decl = predicates.get(name.value)
    if decl is None:
        p.error(f"undeclared predicate {name.value}", name)
    p.next("PUNCT", "(", what="'('")
    args = [_parse_term(p)]
    while p.peek() is not None and p.peek().value == ",":
        p.next()
        args.append(_parse_term(p))
    p.next("PUNCT", ")", what="')'")
    if len(args) != decl.arity:
        p.error(
            f"predicate {decl.symbol} expects {decl.arity} args, got {len(args)}",
            name,
        )
    return Literal(decl, tuple(args), negated)


def _parse_rule(p: _LineParser, predicates: dict):
    weight, weight_tok = _parse_weight(p)
    p.next("PUNCT", ":", what="':'")
    body = [_parse_literal(p, predicates)]
    while p.peek() is not None and p.peek().value == "&":
        p.next()
        body.append(_parse_literal(p, predicates))
    p.next("ARROW", what="'->'")
    head_start = p.i
    head = _parse_literal(p, predicates)
    exponent = 1
    if p.peek() is not None and p.peek().value == "^":
        p.next()
        exp_tok = p.next(what="exponent 1 or 2")
        if exp_tok.value not in ("1", "2"):
            p.error("exponent must be 1 or 2", exp_tok)
        exponent = int(exp_tok.value)
    if not p.at_end():
        p.error("unexpected trailing input after rule")
    bound = frozenset().union(*(lit.variables for lit in body))
    unbound = head.variables - bound
    if unbound:
        name = sorted(unbound)[0]
        culprit = next(
            (t for t in p.tokens[head_start:] if t.kind == "WORD" and t.value == name),
            p.tokens[head_start],
        )
        p.error(f"head variable {name} does not appear in the body", culprit)
    return Rule(weight, tuple(body), head, exponent), weight_tok


def parse_model(text: str) -> ModelFile:
    """Parse model text into a validated ModelFile.

    Raises ModelSyntaxError (with 1-based line and column) on lexical,
    grammatical, or semantic problems.
    """
    declarations = []
    decl_locations = []
    rules = []
    rule_locations = []
    predicates = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(line, line_no)
        if not tokens:
            continue
        p = _LineParser(tokens, line_no, len(line))
        first = tokens[0]
        if first.kind == "WORD" and first.value == "predicate":
            decl, name_tok = _parse_declaration(p)
            if decl.symbol in predicates:
                p.error(f"duplicate predicate declaration {decl.symbol}", name_tok)
            predicates[decl.symbol] = decl
            declarations.append(decl)
            decl_locations.append((line_no, first.column))
        else:
            rule, weight_tok = _parse_rule(p, predicates)
            rules.append(rule)
            rule_locations.append((line_no, weight_tok.column))
    return ModelFile(
        tuple(declarations),
        tuple(rules),
        tuple(decl_locations),
        tuple(rule_locations),
    )


def _render_weight(weight: float) -> str:
    if weight == HARD:
        return "hard"
    # Decimal expansion of repr() keeps exact round-trip without e-notation,
    # which the grammar does not accept.
    text = format(Decimal(repr(weight)), "f")
    return text


def _render_term(term) -> str:
    if isinstance(term, Variable):
        return term.name
    if _BARE_CONSTANT_RE.fullmatch(term.value):
        return term.value
    return f'"{term.value}"'


def _render_literal(lit: Literal) -> str:
    text = f"{lit.predicate.symbol}({', '.join(_render_term(t) for t in lit.args)})"
    return f"!{text}" if lit.negated else text


def render_model(model: ModelFile) -> str:
    """Render a ModelFile back to canonical text.

    parse_model(render_model(m)) is structurally equal to m.
    """
    lines = []
    for decl in model.declarations:
        lines.append(f"predicate {decl.symbol}/{decl.arity} : {decl.closure}")
    for rule in model.rules:
        body = " & ".join(_render_literal(lit) for lit in rule.body)
        head = _render_literal(rule.head)
        suffix = " ^2" if rule.exponent == 2 else ""
        lines.append(f"{_render_weight(rule.weight)} : {body} -> {head}{suffix}")
    return "\n".join(lines) + "\n"


def load_model(path) -> ModelFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())
