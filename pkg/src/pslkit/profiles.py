"""The multi-source user-profiling models and their evidence assembly.

Seven binary user characteristics (gender, age band, and the Big Five
traits) are inferred from up to three kinds of evidence: per-source
classifier scores (Predicts), page-like relations (Likes), and known labels
of other users (Is). Six models cover the design space:

* prior: per characteristic, a pair of opposing rules tying every user to
  the training average; on its own this reproduces the average baseline.
* txt / img: the source pair Predicts(U,c,s) <-> Is(U,c) per characteristic.
* direct: co-liking users share characteristics, plus the prior pair.
* latent: page-like edges propagate through an inferred per-item trait
  (Represents), with item-prior and user-prior pairs.
* profile: the source models plus the latent model, deduplicated.

All rule weights are 1.0 and all hinges linear; edit the rendered `.psl`
templates to change either.
"""

import warnings
from dataclasses import dataclass, field

from .errors import DataError
from .ground import EvidenceDB
from .lang import ModelFile
from .logic import CLOSED, OPEN, Constant, GroundAtom, Literal, PredicateDecl, Rule, Variable

CHARACTERISTICS = ("fem", "yng", "opn", "con", "ext", "agr", "neu")
SOURCES = ("txt", "img")

IS = PredicateDecl("Is", 2, OPEN)
REPRESENTS = PredicateDecl("Represents", 2, OPEN)
PREDICTS = PredicateDecl("Predicts", 3, CLOSED)
LIKES = PredicateDecl("Likes", 2, CLOSED)
USER = PredicateDecl("User", 1, CLOSED)
ITEM = PredicateDecl("Item", 1, CLOSED)
AVERAGE = PredicateDecl("Average", 1, CLOSED)

_U = Variable("U")
_V = Variable("V")
_P = Variable("P")


def _lit(decl, *terms, negated=False):
    return Literal(decl, tuple(terms), negated)


def _rule(body, head, weight=1.0):
    return Rule(weight, tuple(body), head, exponent=1)


def _prior_pair(c: Constant):
    return (
        _rule([_lit(AVERAGE, c), _lit(USER, _U)], _lit(IS, _U, c)),
        _rule([_lit(IS, _U, c), _lit(USER, _U)], _lit(AVERAGE, c)),
    )


def build_prior_model() -> ModelFile:
    """14 rules: the average-anchoring pair per characteristic."""
    rules = []
    for code in CHARACTERISTICS:
        rules.extend(_prior_pair(Constant(code)))
    return ModelFile((IS, USER, AVERAGE), tuple(rules))


def build_source_model(source: str) -> ModelFile:
    """14 rules: the Predicts <-> Is pair per characteristic for one source."""
    if not source or not (source[0].islower() or source[0].isdigit()):
        raise DataError(f"source code {source!r} must be a constant identifier")
    s = Constant(source)
    rules = []
    for code in CHARACTERISTICS:
        c = Constant(code)
        rules.append(_rule([_lit(PREDICTS, _U, c, s)], _lit(IS, _U, c)))
        rules.append(_rule([_lit(IS, _U, c)], _lit(PREDICTS, _U, c, s)))
    return ModelFile((IS, PREDICTS), tuple(rules))


def build_direct_model() -> ModelFile:
    """28 rules: the co-like pair plus the prior pair per characteristic."""
    rules = []
    for code in CHARACTERISTICS:
        c = Constant(code)
        rules.append(
            _rule(
                [_lit(IS, _U, c), _lit(LIKES, _U, _P), _lit(LIKES, _V, _P)],
                _lit(IS, _V, c),
            )
        )
        rules.append(
            _rule(
                [
                    _lit(IS, _U, c, negated=True),
                    _lit(LIKES, _U, _P),
                    _lit(LIKES, _V, _P),
                ],
                _lit(IS, _V, c, negated=True),
            )
        )
        rules.extend(_prior_pair(c))
    return ModelFile((IS, LIKES, USER, AVERAGE), tuple(rules))


def build_latent_model() -> ModelFile:
    """56 rules: user-item propagation, item priors, user priors, per characteristic."""
    rules = []
    for code in CHARACTERISTICS:
        c = Constant(code)
        rules.append(
            _rule([_lit(IS, _U, c), _lit(LIKES, _U, _P)], _lit(REPRESENTS, _P, c))
        )
        rules.append(
            _rule(
                [_lit(IS, _U, c, negated=True), _lit(LIKES, _U, _P)],
                _lit(REPRESENTS, _P, c, negated=True),
            )
        )
        rules.append(
            _rule([_lit(REPRESENTS, _P, c), _lit(LIKES, _U, _P)], _lit(IS, _U, c))
        )
        rules.append(
            _rule(
                [_lit(REPRESENTS, _P, c, negated=True), _lit(LIKES, _U, _P)],
                _lit(IS, _U, c, negated=True),
            )
        )
        rules.append(_rule([_lit(AVERAGE, c), _lit(ITEM, _P)], _lit(REPRESENTS, _P, c)))
        rules.append(_rule([_lit(REPRESENTS, _P, c), _lit(ITEM, _P)], _lit(AVERAGE, c)))
        rules.extend(_prior_pair(c))
    return ModelFile((IS, REPRESENTS, LIKES, ITEM, USER, AVERAGE), tuple(rules))


def build_profile_model(sources=SOURCES) -> ModelFile:
    """Union of the chosen source models and the latent model, deduplicated.

    Duplicate rules shared between constituents appear once; a duplicated
    prior pair would silently double the effective prior weight.
    """
    unknown_order = [s for s in sources if s not in SOURCES]
    ordered = [s for s in SOURCES if s in sources] + sorted(unknown_order)
    parts = [build_source_model(s) for s in ordered] + [build_latent_model()]
    decls = []
    rules = []
    seen_decls = set()
    seen_rules = set()
    for part in parts:
        for decl in part.declarations:
            if decl.symbol not in seen_decls:
                seen_decls.add(decl.symbol)
                decls.append(decl)
        for rule in part.rules:
            if rule not in seen_rules:
                seen_rules.add(rule)
                rules.append(rule)
    return ModelFile(tuple(decls), tuple(rules))


def profile_rule_counts(sources=SOURCES) -> dict:
    """Rule counts for the combined model, before and after deduplication."""
    ordered = [s for s in SOURCES if s in sources] + sorted(
        s for s in sources if s not in SOURCES
    )
    parts = [build_source_model(s) for s in ordered] + [build_latent_model()]
    pre = sum(len(p.rules) for p in parts)
    return {"pre_dedup": pre, "post_dedup": len(build_profile_model(sources).rules)}


BUILDERS = {
    "prior": build_prior_model,
    "txt": lambda: build_source_model("txt"),
    "img": lambda: build_source_model("img"),
    "direct": build_direct_model,
    "latent": build_latent_model,
    "profile": build_profile_model,
}


@dataclass(frozen=True)
class ProfileEvidence:
    """Everything observed about the user population.

    predicts: (user, characteristic, source) -> classifier score in [0, 1]
    likes: (user, page) -> strength in (0, 1]
    known_traits: (user, characteristic) -> binary label
    averages: characteristic -> mean of the known labels; derived when not
        given, checked against the known labels when it is. Characteristics
        with no known users fall back to the neutral 0.5.
    """

    predicts: dict = field(default_factory=dict)
    likes: dict = field(default_factory=dict)
    known_traits: dict = field(default_factory=dict)
    averages: dict = None

    def __post_init__(self):
        for (user, char, source), score in self.predicts.items():
            if char not in CHARACTERISTICS:
                raise DataError(f"unknown characteristic {char!r}")
            if not (0.0 <= score <= 1.0):
                raise DataError(f"prediction for {user}/{char}/{source} outside [0,1]")
        for (user, page), value in self.likes.items():
            if not (0.0 < value <= 1.0):
                raise DataError(f"like {user}/{page} must be in (0, 1]")
        for (user, char), label in self.known_traits.items():
            if char not in CHARACTERISTICS:
                raise DataError(f"unknown characteristic {char!r}")
            if label not in (0, 1):
                raise DataError(f"label for {user}/{char} must be 0 or 1")
        derived = self._derive_averages()
        if self.averages is None:
            object.__setattr__(self, "averages", derived)
        else:
            for char in CHARACTERISTICS:
                if char not in self.averages:
                    raise DataError(f"missing average for {char}")
                if abs(self.averages[char] - derived[char]) > 1e-9:
                    raise DataError(
                        f"average for {char} disagrees with the known labels"
                    )

    def _derive_averages(self) -> dict:
        totals = {c: [0, 0] for c in CHARACTERISTICS}
        for (user, char), label in self.known_traits.items():
            totals[char][0] += label
            totals[char][1] += 1
        return {
            c: (s / n if n else 0.5) for c, (s, n) in totals.items()
        }

    @property
    def users(self) -> set:
        found = {u for (u, _, _) in self.predicts}
        found.update(u for (u, _) in self.likes)
        found.update(u for (u, _) in self.known_traits)
        return found

    @property
    def pages(self) -> set:
        return {p for (_, p) in self.likes}


def evidence_to_db(ev: ProfileEvidence, targets, model: ModelFile = None) -> EvidenceDB:
    """Assemble the grounder's database from profile evidence.

    `targets` is a set of (user, characteristic) pairs whose Is atoms are to
    be inferred. When `model` is given, only atoms of its declared
    predicates are emitted, and Represents targets for every (page,
    characteristic) are added whenever the model declares Represents open.
    """
    target_pairs = sorted(set(targets))
    for user, char in target_pairs:
        if char not in CHARACTERISTICS:
            raise DataError(f"unknown characteristic {char!r} in targets")
        if (user, char) in ev.known_traits:
            raise DataError(f"target {user}/{char} already has a known label")

    declared = (
        {d.symbol for d in model.declarations} if model is not None else None
    )

    def wanted(symbol):
        return declared is None or symbol in declared

    observed = {}
    users = sorted(ev.users | {u for u, _ in target_pairs})
    content_users = {u for (u, _, _) in ev.predicts} | {u for (u, _) in ev.likes}
    known_users = {u for (u, _) in ev.known_traits}
    for user, _ in target_pairs:
        if user not in content_users and user not in known_users:
            warnings.warn(
                f"target user {user} has no evidence; only prior rules apply",
                stacklevel=2,
            )
    if wanted("Predicts"):
        for (user, char, source), score in ev.predicts.items():
            observed[GroundAtom("Predicts", (user, char, source))] = score
    if wanted("Likes"):
        for (user, page), value in ev.likes.items():
            observed[GroundAtom("Likes", (user, page))] = value
    if wanted("Is"):
        for (user, char), label in ev.known_traits.items():
            observed[GroundAtom("Is", (user, char))] = float(label)
    if wanted("Average"):
        for char in CHARACTERISTICS:
            observed[GroundAtom("Average", (char,))] = ev.averages[char]
    if wanted("User"):
        for user in users:
            observed[GroundAtom("User", (user,))] = 1.0
    if wanted("Item"):
        for page in sorted(ev.pages):
            observed[GroundAtom("Item", (page,))] = 1.0

    target_atoms = [GroundAtom("Is", (user, char)) for user, char in target_pairs]
    latent_items = model is not None and any(
        d.symbol == "Represents" and d.closure == OPEN for d in model.declarations
    )
    if latent_items:
        for page in sorted(ev.pages):
            for char in CHARACTERISTICS:
                target_atoms.append(GroundAtom("Represents", (page, char)))
    return EvidenceDB(observed, target_atoms)
