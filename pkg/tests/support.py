"""Shared helpers for the test suite: random model files and tiny oracles."""

import itertools
import math
import random
from fractions import Fraction

from pslkit.lang import ModelFile
from pslkit.logic import (
    CLOSED,
    HARD,
    OPEN,
    Constant,
    GroundAtom,
    Interpretation,
    Literal,
    PredicateDecl,
    Rule,
    Variable,
    distance_to_satisfaction,
)

_CONST_POOL = ["alice", "bob", "carol", "fem", "yng", "txt", "img", "p1", "42", "x_9"]
_QUOTED_POOL = ["Weird Page", "has space", "UPPER", "dot.com", "", "p#1"]


def random_model(rng: random.Random) -> ModelFile:
    """A random valid ModelFile exercising the whole grammar."""
    n_preds = rng.randint(1, 5)
    decls = tuple(
        PredicateDecl(
            f"P{i}_{rng.choice(['a', 'b', 'c'])}",
            rng.randint(1, 3),
            rng.choice([OPEN, CLOSED]),
        )
        for i in range(n_preds)
    )
    rules = []
    for _ in range(rng.randint(1, 8)):
        var_pool = [Variable(v) for v in ("U", "V", "W", "X2")]
        body = []
        body_vars = set()
        for _ in range(rng.randint(1, 3)):
            decl = rng.choice(decls)
            args = []
            for _ in range(decl.arity):
                if rng.random() < 0.5:
                    v = rng.choice(var_pool)
                    body_vars.add(v)
                    args.append(v)
                elif rng.random() < 0.2:
                    args.append(Constant(rng.choice(_QUOTED_POOL)))
                else:
                    args.append(Constant(rng.choice(_CONST_POOL)))
            body.append(Literal(decl, tuple(args), rng.random() < 0.3))
        head_decl = rng.choice(decls)
        head_args = []
        for _ in range(head_decl.arity):
            if body_vars and rng.random() < 0.6:
                head_args.append(rng.choice(sorted(body_vars, key=lambda v: v.name)))
            else:
                head_args.append(Constant(rng.choice(_CONST_POOL)))
        head = Literal(head_decl, tuple(head_args), rng.random() < 0.3)
        if rng.random() < 0.1:
            weight = HARD
        else:
            weight = round(rng.uniform(0, 10), rng.randint(0, 4))
        rules.append(Rule(weight, tuple(body), head, rng.choice([1, 1, 2])))
    return ModelFile(decls, tuple(rules))


def enumerate_substitutions(rule: Rule, domains: dict):
    """All substitutions of rule variables, one dict per combination.

    `domains` maps variable name -> iterable of constant strings. Independent
    of the production grounder: a plain cross product in sorted variable order.
    """
    names = sorted({v for lit in (*rule.body, rule.head) for v in lit.variables})
    pools = [sorted(domains[name]) for name in names]
    for combo in itertools.product(*pools):
        yield dict(zip(names, combo))


def substitute(literal: Literal, subst: dict) -> GroundAtom:
    args = tuple(
        subst[t.name] if isinstance(t, Variable) else t.value for t in literal.args
    )
    return GroundAtom(literal.predicate.symbol, args)


def ground_rule(rule: Rule, subst: dict) -> Rule:
    def ground_lit(lit):
        args = tuple(
            Constant(subst[t.name]) if isinstance(t, Variable) else t
            for t in lit.args
        )
        return Literal(lit.predicate, args, lit.negated)

    return Rule(
        rule.weight,
        tuple(ground_lit(lit) for lit in rule.body),
        ground_lit(rule.head),
        rule.exponent,
    )


def brute_force_groundings(rule: Rule, observed: dict, targets: set, domains: dict):
    """Independent substitution enumerator used as the grounding-count oracle.

    Yields substitutions that produce a real grounding:
      * every positive closed-predicate body literal matches a nonzero
        observed atom,
      * every open-predicate atom (body or head) exists as evidence or target,
      * a closed-predicate head atom exists as evidence,
      * the head literal does not literally repeat a body literal (tautology).
    """
    for subst in enumerate_substitutions(rule, domains):
        ok = True
        for lit in rule.body:
            atom = substitute(lit, subst)
            if lit.predicate.closed:
                if not lit.negated and observed.get(atom, 0) == 0:
                    ok = False
                    break
            else:
                if atom not in observed and atom not in targets:
                    ok = False
                    break
        if not ok:
            continue
        head_atom = substitute(rule.head, subst)
        if rule.head.predicate.closed:
            if head_atom not in observed:
                continue
        elif head_atom not in observed and head_atom not in targets:
            continue
        tautology = any(
            substitute(lit, subst) == head_atom and lit.negated == rule.head.negated
            for lit in rule.body
        )
        if tautology:
            continue
        yield subst


def eval_ground_rule(rule: Rule, subst: dict, assignment: dict, observed: dict):
    """Distance-to-satisfaction of a grounding, powered by the rule exponent.

    Resolves atoms through targets first, then observed evidence, then the
    closed-world default for closed predicates. Uses the literal-level
    interpretation path, so it is an independent check on compiled potentials.
    """
    values = {}
    for lit in (*rule.body, rule.head):
        atom = substitute(lit, subst)
        if atom in assignment:
            values[atom] = assignment[atom]
        elif atom in observed:
            values[atom] = observed[atom]
        elif lit.predicate.closed:
            values[atom] = 0
        else:
            raise KeyError(atom)
    interp = Interpretation(values)
    return distance_to_satisfaction(ground_rule(rule, subst), interp) ** rule.exponent


def build_program(n_vars, potentials, hard=()):
    """Assemble a GroundProgram directly from (weight, coefs, const, exponent).

    `potentials` entries: (weight, {var_index: coef}, constant, exponent);
    `hard` entries: ({var_index: coef}, constant). Variables are synthetic
    atoms Y(v00), Y(v01), ...
    """
    import numpy as np

    from pslkit.ground import GroundProgram, RuleCounts, _SubstBlock

    variables = tuple(GroundAtom("Y", (f"v{i:02d}",)) for i in range(n_vars))
    weight, constant, exponent, rule_id = [], [], [], []
    indptr, var_idx, coef = [0], [], []
    for w, coefs, const, p in potentials:
        weight.append(w)
        constant.append(const)
        exponent.append(p)
        rule_id.append(0)
        for v in sorted(coefs):
            var_idx.append(v)
            coef.append(coefs[v])
        indptr.append(len(var_idx))
    h_constant, h_rule = [], []
    h_indptr, h_var, h_coef = [0], [], []
    for coefs, const in hard:
        h_constant.append(const)
        h_rule.append(1)
        for v in sorted(coefs):
            h_var.append(v)
            h_coef.append(coefs[v])
        h_indptr.append(len(h_var))
    n_pot, n_hard = len(potentials), len(hard)
    return GroundProgram(
        variables=variables,
        weight=np.array(weight, dtype=np.float64),
        constant=np.array(constant, dtype=np.float64),
        exponent=np.array(exponent, dtype=np.int8),
        rule_id=np.array(rule_id, dtype=np.int32),
        indptr=np.array(indptr, dtype=np.int64),
        var_idx=np.array(var_idx, dtype=np.int64),
        coef=np.array(coef, dtype=np.float64),
        hard_constant=np.array(h_constant, dtype=np.float64),
        hard_rule_id=np.array(h_rule, dtype=np.int32),
        hard_indptr=np.array(h_indptr, dtype=np.int64),
        hard_var_idx=np.array(h_var, dtype=np.int64),
        hard_coef=np.array(h_coef, dtype=np.float64),
        rule_counts=(RuleCounts(n_pot, n_pot), RuleCounts(n_hard, n_hard)),
        constant_names=(),
        subst_blocks=(
            (_SubstBlock(0, (), np.zeros((n_pot, 0), dtype=np.int64)),)
            if n_pot
            else ()
        ),
        hard_subst_blocks=(
            (_SubstBlock(0, (), np.zeros((n_hard, 0), dtype=np.int64)),)
            if n_hard
            else ()
        ),
    )


# Grid steps and evidence lattices per variable count. Hinge hyperplanes have
# +-1 coefficients, so optima sit at vertices whose coordinates are rational
# with denominators dividing 2^(k-1)-scaled determinants; placing constants
# on these lattices puts every vertex exactly on the oracle grid, which is
# what lets a coarse exhaustive grid certify tight objective tolerances.
ORACLE_DESIGN = {
    1: {"step": 1e-3, "lattice": 1e-3, "exponents": (1, 2), "max_pot": 12},
    2: {"step": 1e-3, "lattice": 2e-3, "exponents": (1, 2), "max_pot": 12},
    3: {"step": 5e-3, "lattice": 0.02, "exponents": (1, 2), "max_pot": 10},
    4: {"step": 1 / 48, "lattice": 1 / 3, "exponents": (1,), "max_pot": 12},
    5: {"step": 1 / 24, "lattice": 1e-3, "exponents": (1, 2), "max_pot": 8,
        "satisfiable": True},
}


def random_oracle_program(rng: random.Random, n_vars: int):
    """A random hinge program sized for exhaustive-grid certification.

    Returns (program, grid_step). Dimensions 1-4 produce conflicting
    potentials with lattice-aligned constants; dimension 5 produces programs
    that are satisfiable at a known grid point (optimum 0, flat region).
    """
    design = ORACLE_DESIGN[n_vars]
    q = design["lattice"]
    n_pot = rng.randint(2, design["max_pot"])
    potentials = []
    if design.get("satisfiable"):
        m = int(round(1.0 / design["step"]))
        feasible = [rng.randint(0, m) / m for _ in range(n_vars)]
        for _ in range(n_pot):
            k = rng.randint(1, min(3, n_vars))
            vs = rng.sample(range(n_vars), k)
            coefs = {v: rng.choice([-1.0, 1.0]) for v in vs}
            at_point = sum(c * feasible[v] for v, c in coefs.items())
            margin = rng.uniform(0.02, 0.2)
            const = math.floor((-at_point - margin) / 1e-3) * 1e-3
            w = rng.uniform(0.05, 3.0)
            potentials.append((w, coefs, const, rng.choice(design["exponents"])))
        return build_program(n_vars, potentials), design["step"]
    while len(potentials) < n_pot:
        k = rng.randint(1, min(3, n_vars))
        vs = rng.sample(range(n_vars), k)
        coefs = {v: rng.choice([-1.0, 1.0]) for v in vs}
        n_pos = sum(1 for c in coefs.values() if c > 0)
        lo = int(math.ceil(-(k - 0.5) / q))
        hi = int(math.floor(1.0 / q))
        const = rng.randint(lo, hi) * q
        if const + n_pos <= 0:
            continue  # hinge constantly zero; a real grounding would be pruned
        w = rng.uniform(0.05, 3.0)
        potentials.append((w, coefs, const, rng.choice(design["exponents"])))
    return build_program(n_vars, potentials), design["step"]


def pairwise_auc(scores, gold) -> float:
    """Mann-Whitney AUC by exhaustive pair enumeration; ties count half."""
    pos = [scores[u] for u in scores if gold[u] == 1]
    neg = [scores[u] for u in scores if gold[u] == 0]
    if not pos or not neg:
        raise ValueError("need both classes")
    doubled_wins = 0
    for p in pos:
        for n in neg:
            if p > n:
                doubled_wins += 2
            elif p == n:
                doubled_wins += 1
    return doubled_wins / (2 * len(pos) * len(neg))


def exact_fraction_values(rng: random.Random, n: int):
    return [Fraction(rng.randint(0, 1000), 1000) for _ in range(n)]
