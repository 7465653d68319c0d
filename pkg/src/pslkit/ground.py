"""Compile rules against evidence into ground hinge-loss potentials.

The join is evidence driven: variable bindings come from the atoms actually
present in the database (observed atoms for closed predicates, observed plus
target atoms for open ones), never from a blind cross product over all
constants. Each surviving grounding becomes one linear hinge

    phi(y) = max(constant + sum_i coef_i * y_i, 0) ** p

with observed-atom contributions folded into `constant` exactly, so only
target variables carry coefficients. HARD rules compile to linear
inequalities `l(y) <= 0` instead of weighted potentials.

Groundings are dropped (never counted) when the head literal repeats a body
literal verbatim (a tautology, e.g. the U = V self-pairing of user-user
rules) or when a closed-predicate head atom is absent from the evidence:
a reverse rule such as `Is(U,c) -> Predicts(U,c,s)` only constrains users
for whom source `s` produced a prediction, which keeps a model with a source
fully removed equivalent to the model without that source's rules.
Groundings whose hinge is constantly zero over [0,1]^n (for example a
closed-predicate body literal with value 0) are counted, then pruned;
both counts are kept per rule.
"""

import bisect
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, GroundingCapError, MissingAtomError
from .lang import ModelFile
from .logic import Constant, GroundAtom, Interpretation, Literal, Rule, Variable

DEFAULT_GROUNDING_CAP = 50_000_000


class EvidenceDB:
    """The observed/target split plus derived lookup tables.

    `observed` holds every ground atom with a known value; `targets` are the
    atoms whose values inference must produce. The two sets are disjoint.
    Constant domains per (predicate, argument position) are derived from all
    atoms seen and back the fallback enumeration for variables that no
    evidence-bearing literal binds.
    """

    def __init__(self, observed, targets):
        if not isinstance(observed, Interpretation):
            observed = Interpretation(observed)
        targets = tuple(sorted(set(targets)))
        overlap = [a for a in targets if a in observed]
        if overlap:
            raise DataError(
                f"atom {overlap[0]} appears both as evidence and as a target"
            )
        self.observed = observed
        self.targets = targets
        self._index = None

    def target_index(self) -> dict:
        return {atom: i for i, atom in enumerate(self.targets)}

    @property
    def predicates(self) -> set:
        names = {a.predicate for a, _ in self.observed.items()}
        names.update(a.predicate for a in self.targets)
        return names

    def _build_index(self):
        constants = set()
        for atom, _ in self.observed.items():
            constants.update(atom.args)
        for atom in self.targets:
            constants.update(atom.args)
        intern = {c: i for i, c in enumerate(sorted(constants))}
        names = tuple(sorted(constants))

        rows = {}
        for atom, value in self.observed.items():
            rows.setdefault(atom.predicate, []).append((atom.args, value, -1))
        for idx, atom in enumerate(self.targets):
            rows.setdefault(atom.predicate, []).append((atom.args, 0.0, idx))

        tables = {}
        domains = {}
        for pred, entries in rows.items():
            entries.sort(key=lambda e: e[0])
            arity = len(entries[0][0])
            if any(len(e[0]) != arity for e in entries):
                raise DataError(f"predicate {pred} used with inconsistent arity")
            args = np.array(
                [[intern[c] for c in e[0]] for e in entries], dtype=np.int64
            ).reshape(len(entries), arity)
            values = np.array([e[1] for e in entries], dtype=np.float64)
            tidx = np.array([e[2] for e in entries], dtype=np.int64)
            table = _PredTable(args, values, tidx)
            table.build_packed(len(intern) + 1)
            tables[pred] = table
            for pos in range(arity):
                domains[(pred, pos)] = np.unique(args[:, pos])
        self._index = (intern, names, tables, domains)

    @property
    def index(self):
        if self._index is None:
            self._build_index()
        return self._index


@dataclass
class _PredTable:
    args: np.ndarray  # (n, arity) interned constants
    values: np.ndarray  # observed value; 0.0 placeholder for targets
    target_idx: np.ndarray  # -1 for observed atoms
    packed: np.ndarray = None  # mixed-radix atom keys, ascending
    radix: int = 0

    def build_packed(self, radix: int):
        # rows are sorted lexicographically, so packed keys come out sorted
        if radix ** self.args.shape[1] < 2**62:
            self.radix = radix
            packed = np.zeros(len(self.values), dtype=np.int64)
            for p in range(self.args.shape[1]):
                packed = packed * radix + self.args[:, p]
            self.packed = packed

    def lookup(self, key_cols):
        """Vectorized atom lookup: (values, target_idx, missing) per row."""
        n = len(key_cols[0])
        unseen = np.zeros(n, dtype=bool)
        for col in key_cols:
            unseen |= col < 0
        if self.packed is not None:
            q = np.zeros(n, dtype=np.int64)
            for col in key_cols:
                q = q * self.radix + np.where(col < 0, 0, col)
            pos = np.searchsorted(self.packed, q)
            pos_c = np.minimum(pos, len(self.packed) - 1)
            found = (pos < len(self.packed)) & (self.packed[pos_c] == q) & ~unseen
            row = np.where(found, pos_c, 0)
        else:
            # arity/constant count too large to pack: fall back to a merge
            keys = {f"a{p}": col for p, col in enumerate(key_cols)}
            arity = self.args.shape[1]
            frame = pd.DataFrame({f"a{p}": self.args[:, p] for p in range(arity)})
            frame["__row"] = np.arange(len(self.values))
            merged = pd.DataFrame(keys).merge(frame, on=list(keys), how="left")
            found = merged["__row"].notna().to_numpy() & ~unseen
            row = merged["__row"].fillna(0).to_numpy().astype(np.int64)
        values = np.where(found, self.values[row], 0.0)
        tidx = np.where(found, self.target_idx[row], -1)
        return values, tidx, ~found


@dataclass(frozen=True)
class HingeLossPotential:
    """One compiled ground potential; a convenience view over the arrays."""

    weight: float
    coefficients: dict
    constant: float
    exponent: int
    rule_id: int
    substitution: dict

    def linear(self, y) -> float:
        return self.constant + sum(c * y[i] for i, c in self.coefficients.items())

    def value(self, y) -> float:
        return max(self.linear(y), 0.0) ** self.exponent


@dataclass
class RuleCounts:
    pre_prune: int
    post_prune: int


@dataclass
class _SubstBlock:
    """Substitutions for one rule's potentials, kept columnar."""

    start: int
    var_names: tuple
    matrix: np.ndarray  # (n_potentials_of_rule, n_vars) interned constants


@dataclass(eq=False)
class GroundProgram:
    """All potentials plus the target-variable index; input to every solver.

    Potentials are stored struct-of-arrays and sorted by (rule id,
    substitution); variables follow canonical ground-atom order. Two
    grounding runs over the same inputs serialize byte-identically.
    """

    variables: tuple
    weight: np.ndarray
    constant: np.ndarray
    exponent: np.ndarray
    rule_id: np.ndarray
    indptr: np.ndarray
    var_idx: np.ndarray
    coef: np.ndarray
    hard_constant: np.ndarray
    hard_rule_id: np.ndarray
    hard_indptr: np.ndarray
    hard_var_idx: np.ndarray
    hard_coef: np.ndarray
    rule_counts: tuple
    constant_names: tuple = field(repr=False, default=())
    subst_blocks: tuple = field(repr=False, default=())
    hard_subst_blocks: tuple = field(repr=False, default=())

    @property
    def n_potentials(self) -> int:
        return len(self.weight)

    @property
    def n_hard(self) -> int:
        return len(self.hard_constant)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def _substitution(self, blocks, i: int):
        starts = [b.start for b in blocks]
        k = bisect.bisect_right(starts, i) - 1
        block = blocks[k]
        row = block.matrix[i - block.start]
        return block.var_names, tuple(self.constant_names[c] for c in row)

    def potential(self, i: int) -> HingeLossPotential:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        var_names, subst = self._substitution(self.subst_blocks, i)
        return HingeLossPotential(
            weight=float(self.weight[i]),
            coefficients={
                int(v): float(c)
                for v, c in zip(self.var_idx[lo:hi], self.coef[lo:hi])
            },
            constant=float(self.constant[i]),
            exponent=int(self.exponent[i]),
            rule_id=int(self.rule_id[i]),
            substitution=dict(zip(var_names, subst)),
        )

    def potentials(self):
        return [self.potential(i) for i in range(self.n_potentials)]

    def linear_values(self, y: np.ndarray) -> np.ndarray:
        seg = np.repeat(np.arange(self.n_potentials), np.diff(self.indptr))
        sums = np.bincount(
            seg, weights=self.coef * y[self.var_idx], minlength=self.n_potentials
        )
        return self.constant + sums

    def hard_values(self, y: np.ndarray) -> np.ndarray:
        seg = np.repeat(np.arange(self.n_hard), np.diff(self.hard_indptr))
        sums = np.bincount(
            seg,
            weights=self.hard_coef * y[self.hard_var_idx],
            minlength=self.n_hard,
        )
        return self.hard_constant + sums

    def dump_tsv(self) -> str:
        """Deterministic debug serialization of the whole program."""
        out = ["#ground-program\tv1"]
        for i, atom in enumerate(self.variables):
            out.append(f"V\t{i}\t{atom.predicate}\t" + "\t".join(atom.args))
        for rid, counts in enumerate(self.rule_counts):
            out.append(f"R\t{rid}\t{counts.pre_prune}\t{counts.post_prune}")
        for i in range(self.n_potentials):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            var_names, subst = self._substitution(self.subst_blocks, i)
            terms = ",".join(
                f"{int(v)}:{c!r}"
                for v, c in zip(self.var_idx[lo:hi], self.coef[lo:hi])
            )
            bind = ",".join(f"{n}={c}" for n, c in zip(var_names, subst))
            out.append(
                f"P\t{int(self.rule_id[i])}\t{self.weight[i]!r}\t"
                f"{int(self.exponent[i])}\t{self.constant[i]!r}\t{bind}\t{terms}"
            )
        for i in range(self.n_hard):
            lo, hi = self.hard_indptr[i], self.hard_indptr[i + 1]
            var_names, subst = self._substitution(self.hard_subst_blocks, i)
            terms = ",".join(
                f"{int(v)}:{c!r}"
                for v, c in zip(self.hard_var_idx[lo:hi], self.hard_coef[lo:hi])
            )
            bind = ",".join(f"{n}={c}" for n, c in zip(var_names, subst))
            out.append(
                f"H\t{int(self.hard_rule_id[i])}\t{self.hard_constant[i]!r}\t"
                f"{bind}\t{terms}"
            )
        return "\n".join(out) + "\n"


def count_potentials(program: GroundProgram, rule_id: int) -> int:
    """Exact number of groundings a rule produced before pruning."""
    if not (0 <= rule_id < len(program.rule_counts)):
        raise KeyError(f"unknown rule id {rule_id}")
    return program.rule_counts[rule_id].pre_prune


def _is_driver(lit: Literal) -> bool:
    # Positive literals bind variables from their atom tables. So do negated
    # open literals, whose table is the whole universe of resolvable atoms.
    # Negated closed literals cannot: their interesting groundings are the
    # absent atoms (closed-world value 0, literal value 1).
    return (not lit.negated) or (not lit.predicate.closed)


def _candidate_frame(lit: Literal, table, intern):
    n = len(table.values)
    mask = np.ones(n, dtype=bool)
    if lit.predicate.closed and not lit.negated:
        mask &= table.values != 0
    first_pos = {}
    for pos, term in enumerate(lit.args):
        if isinstance(term, Constant):
            cid = intern.get(term.value, -1)
            if cid < 0:
                mask[:] = False
            else:
                mask &= table.args[:, pos] == cid
        else:
            if term.name in first_pos:
                mask &= table.args[:, pos] == table.args[:, first_pos[term.name]]
            else:
                first_pos[term.name] = pos
    if not first_pos:
        # fully ground literal: satisfied by at least one row, or dead
        return pd.DataFrame(index=[0] if mask.any() else [])
    frame = pd.DataFrame(
        {name: table.args[mask, pos] for name, pos in sorted(first_pos.items())}
    )
    return frame.drop_duplicates(ignore_index=True)


def _resolve_literal(lit: Literal, sub: pd.DataFrame, table, intern, n_rows: int):
    """Per-grounding (value, target index, missing) columns for one literal."""
    keys = {}
    for pos, term in enumerate(lit.args):
        if isinstance(term, Variable):
            keys[f"a{pos}"] = sub[term.name].to_numpy()
        else:
            cid = intern.get(term.value, -1)
            keys[f"a{pos}"] = np.full(n_rows, cid, dtype=np.int64)
    if table is None:
        missing = np.ones(n_rows, dtype=bool)
        return np.zeros(n_rows), np.full(n_rows, -1, dtype=np.int64), missing, keys
    key_cols = [keys[f"a{pos}"] for pos in range(len(lit.args))]
    values, tidx, missing = table.lookup(key_cols)
    return values, tidx, missing, keys


def _format_atom(lit: Literal, keys: dict, row: int, names) -> str:
    parts = []
    for pos in range(len(lit.args)):
        cid = int(keys[f"a{pos}"][row])
        parts.append(names[cid] if cid >= 0 else "?")
    return f"{lit.predicate.symbol}({', '.join(parts)})"


@dataclass
class _RuleResult:
    rule_vars: list
    n_rows: int
    alive: np.ndarray = None
    constant: np.ndarray = None
    coef_rows: np.ndarray = None
    coef_vars: np.ndarray = None
    coef_vals: np.ndarray = None
    counts: np.ndarray = None
    subst: np.ndarray = None


def _ground_rule(rule: Rule, rule_idx: int, db: EvidenceDB, cap: int) -> _RuleResult:
    intern, names, tables, domains = db.index
    body = rule.body
    all_literals = (*body, rule.head)
    head_pos = len(body)

    sub = None
    for lit in body:
        if not _is_driver(lit):
            continue
        table = tables.get(lit.predicate.symbol)
        if table is None:
            cand = pd.DataFrame(
                {
                    name: np.array([], dtype=np.int64)
                    for name in sorted(lit.variables)
                }
            )
            if not lit.variables:
                cand = pd.DataFrame(index=[])
        else:
            cand = _candidate_frame(lit, table, intern)
        if sub is None:
            sub = cand
        else:
            shared = [c for c in cand.columns if c in sub.columns]
            if shared:
                sub = sub.merge(cand, on=shared, how="inner")
            elif len(cand.columns) > 0:
                sub = sub.merge(cand, how="cross")
            elif len(cand) == 0:
                sub = sub.iloc[0:0]
        if len(sub) > cap:
            raise GroundingCapError(
                f"rule {rule_idx} exceeded the grounding cap ({cap}) while joining"
            )
    if sub is None:
        sub = pd.DataFrame(index=[0])

    rule_vars = sorted({v for lit in all_literals for v in lit.variables})
    for var in rule_vars:
        if var in sub.columns:
            continue
        source = None
        for lit in all_literals:
            for pos, term in enumerate(lit.args):
                if isinstance(term, Variable) and term.name == var:
                    source = (lit.predicate.symbol, pos)
                    break
            if source:
                break
        dom = domains.get(source, np.array([], dtype=np.int64))
        sub = sub.merge(pd.DataFrame({var: dom}), how="cross")
        if len(sub) > cap:
            raise GroundingCapError(
                f"rule {rule_idx} exceeded the grounding cap ({cap}) while joining"
            )

    n_rows = len(sub)
    if n_rows == 0:
        return _RuleResult(rule_vars, 0)

    resolved = []
    keep = np.ones(n_rows, dtype=bool)
    for k, lit in enumerate(all_literals):
        table = tables.get(lit.predicate.symbol)
        values, tidx, missing, keys = _resolve_literal(lit, sub, table, intern, n_rows)
        if lit.predicate.closed:
            # closed world: absent body atoms take value 0; an absent head
            # atom means the rule has nothing to constrain, so no grounding
            if k == head_pos:
                keep &= ~missing
        else:
            bad = missing & keep
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise MissingAtomError(
                    f"open-predicate atom {_format_atom(lit, keys, row, names)} "
                    "is neither evidence nor a target"
                )
        resolved.append((lit, values, tidx, keys))

    # tautology: head literal identical (atom and polarity) to a body literal
    head_lit, _, _, head_keys = resolved[head_pos]
    arity = len(head_lit.args)
    for lit, _, _, keys in resolved[:head_pos]:
        if lit.predicate.symbol != head_lit.predicate.symbol:
            continue
        if lit.negated != head_lit.negated:
            continue
        same = np.ones(n_rows, dtype=bool)
        for pos in range(arity):
            same &= keys[f"a{pos}"] == head_keys[f"a{pos}"]
        keep &= ~same

    if not keep.all():
        sub = sub.loc[keep].reset_index(drop=True)
        resolved = [
            (lit, values[keep], tidx[keep], None)
            for lit, values, tidx, _ in resolved
        ]
        n_rows = len(sub)
    if n_rows == 0:
        return _RuleResult(rule_vars, 0)

    # canonical order: lexicographic on the substitution in variable order
    if rule_vars:
        order = np.lexsort(tuple(sub[v].to_numpy() for v in reversed(rule_vars)))
        sub = sub.iloc[order].reset_index(drop=True)
        resolved = [
            (lit, values[order], tidx[order], None)
            for lit, values, tidx, _ in resolved
        ]

    constant = np.full(n_rows, float(-(len(body) - 1)))
    coef_rows, coef_vars, coef_vals = [], [], []
    row_ids = np.arange(n_rows)
    for k, (lit, values, tidx, _) in enumerate(resolved):
        is_head = k == head_pos
        is_target = tidx >= 0
        obs = ~is_target
        head_sign = -1.0 if is_head else 1.0
        if lit.negated:
            # literal value is 1 - v: the 1 goes to the constant
            constant += head_sign * np.where(obs, 1.0 - values, 1.0)
            sign = -head_sign
        else:
            constant += head_sign * np.where(obs, values, 0.0)
            sign = head_sign
        if is_target.any():
            coef_rows.append(row_ids[is_target])
            coef_vars.append(tidx[is_target])
            coef_vals.append(np.full(int(is_target.sum()), sign))

    if coef_rows:
        rows = np.concatenate(coef_rows)
        vars_ = np.concatenate(coef_vars)
        vals = np.concatenate(coef_vals)
        # merge duplicate variables within a grounding, drop cancellations
        span = len(db.targets) + 1
        key = rows * span + vars_
        uniq, inverse = np.unique(key, return_inverse=True)
        merged_vals = np.bincount(inverse, weights=vals, minlength=len(uniq))
        nz = merged_vals != 0
        rows = (uniq // span).astype(np.int64)[nz]
        vars_ = (uniq % span).astype(np.int64)[nz]
        vals = merged_vals[nz]
    else:
        rows = np.array([], dtype=np.int64)
        vars_ = np.array([], dtype=np.int64)
        vals = np.array([], dtype=np.float64)

    counts = np.bincount(rows, minlength=n_rows).astype(np.int64)
    sup = constant + np.bincount(rows, weights=np.maximum(vals, 0), minlength=n_rows)
    alive = sup > 0

    subst_matrix = (
        np.stack([sub[v].to_numpy() for v in rule_vars], axis=1)
        if rule_vars
        else np.zeros((n_rows, 0), dtype=np.int64)
    )
    return _RuleResult(
        rule_vars, n_rows, alive, constant, rows, vars_, vals, counts, subst_matrix
    )


def ground(
    model: ModelFile, db: EvidenceDB, max_potentials: int = DEFAULT_GROUNDING_CAP
) -> GroundProgram:
    """Ground every rule of the model against the database.

    Raises DataError when the database mentions undeclared predicates or
    targets a closed predicate, MissingAtomError for unresolvable open atoms,
    and GroundingCapError when more than `max_potentials` groundings appear.
    """
    declared = {d.symbol: d for d in model.declarations}
    for pred in sorted(db.predicates):
        if pred not in declared:
            raise DataError(f"predicate {pred} in evidence is not declared")
    for atom in db.targets:
        if declared[atom.predicate].closed:
            raise DataError(f"target atom {atom} has closed predicate {atom.predicate}")

    _, names, _, _ = db.index

    soft = {k: [] for k in ("w", "c", "e", "r", "cnt", "vars", "vals")}
    hard = {k: [] for k in ("c", "r", "cnt", "vars", "vals")}
    soft_blocks, hard_blocks = [], []
    soft_total, hard_total = 0, 0
    rule_counts = []
    budget = max_potentials
    for rule_idx, rule in enumerate(model.rules):
        result = _ground_rule(rule, rule_idx, db, budget)
        if result.n_rows == 0:
            rule_counts.append(RuleCounts(0, 0))
            continue
        alive = result.alive
        pre = int(result.n_rows)
        post = int(alive.sum())
        rule_counts.append(RuleCounts(pre, post))
        budget -= pre
        if budget < 0:
            raise GroundingCapError(
                f"grounding exceeded the cap of {max_potentials} potentials"
            )
        if post == 0:
            continue
        nnz_keep = alive[result.coef_rows]
        if rule.is_hard:
            hard["c"].append(result.constant[alive])
            hard["r"].append(np.full(post, rule_idx, dtype=np.int32))
            hard["cnt"].append(result.counts[alive])
            hard["vars"].append(result.coef_vars[nnz_keep])
            hard["vals"].append(result.coef_vals[nnz_keep])
            hard_blocks.append(
                _SubstBlock(hard_total, tuple(result.rule_vars), result.subst[alive])
            )
            hard_total += post
        else:
            soft["w"].append(np.full(post, rule.weight))
            soft["e"].append(np.full(post, rule.exponent, dtype=np.int8))
            soft["c"].append(result.constant[alive])
            soft["r"].append(np.full(post, rule_idx, dtype=np.int32))
            soft["cnt"].append(result.counts[alive])
            soft["vars"].append(result.coef_vars[nnz_keep])
            soft["vals"].append(result.coef_vals[nnz_keep])
            soft_blocks.append(
                _SubstBlock(soft_total, tuple(result.rule_vars), result.subst[alive])
            )
            soft_total += post

    def _cat(parts, dtype):
        return np.concatenate(parts) if parts else np.array([], dtype=dtype)

    counts_soft = _cat(soft["cnt"], np.int64).astype(np.int64)
    counts_hard = _cat(hard["cnt"], np.int64).astype(np.int64)
    return GroundProgram(
        variables=db.targets,
        weight=_cat(soft["w"], np.float64),
        constant=_cat(soft["c"], np.float64),
        exponent=_cat(soft["e"], np.int8),
        rule_id=_cat(soft["r"], np.int32),
        indptr=np.concatenate([[0], np.cumsum(counts_soft)]).astype(np.int64),
        var_idx=_cat(soft["vars"], np.int64),
        coef=_cat(soft["vals"], np.float64),
        hard_constant=_cat(hard["c"], np.float64),
        hard_rule_id=_cat(hard["r"], np.int32),
        hard_indptr=np.concatenate([[0], np.cumsum(counts_hard)]).astype(np.int64),
        hard_var_idx=_cat(hard["vars"], np.int64),
        hard_coef=_cat(hard["vals"], np.float64),
        rule_counts=tuple(rule_counts),
        constant_names=names,
        subst_blocks=tuple(soft_blocks),
        hard_subst_blocks=tuple(hard_blocks),
    )
