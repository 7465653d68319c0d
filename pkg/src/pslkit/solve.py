"""MAP inference over a ground program.

Minimizes  sum_j  w_j * max(l_j(y), 0)^p_j  over y in [0,1]^n, subject to
the hard constraints l_k(y) <= 0. Three methods:

* ``admm``: consensus ADMM, the production solver. Every potential (and
  every hard constraint) owns local copies of the variables it touches;
  local subproblems have closed-form solutions (a soft threshold along the
  hinge direction for p=1, a 1-D quadratic for p=2, a half-space projection
  for hard constraints); the consensus step averages local copies plus duals
  and clips to [0,1].
* ``projected_gradient``: an accelerated projected-gradient cross-check on
  a Huber-smoothed surrogate, with continuation driving the smoothing to
  zero. Plain subgradient steps cannot reach the agreement tolerances this
  package tests for, smoothing can. Hard constraints are not supported.
* ``grid_oracle``: exhaustive evaluation on a regular grid, for small
  programs only. Also reports the gap to the second-best grid point so
  tests can tell unique optima from flat ones.

All methods are deterministic: fixed inputs give bit-identical results,
independent of thread counts (the solver itself is single threaded; any
parallelism lives above it).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapabilityError, DataError, MissingAtomError, NumericError
from .ground import GroundProgram
from .logic import Interpretation

HARD_FEASIBILITY_TOL = 1e-6

ADMM = "admm"
PROJECTED_GRADIENT = "projected_gradient"
GRID_ORACLE = "grid_oracle"
_METHODS = (ADMM, PROJECTED_GRADIENT, GRID_ORACLE)


@dataclass(frozen=True)
class SolverConfig:
    method: str = ADMM
    rho: float = 1.0
    max_iterations: int = 25000
    eps_abs: float = 1e-5
    eps_rel: float = 1e-4
    grid_step: float = 1e-3
    seed: int = 0  # reserved for stochastic methods; current ones are deterministic
    adaptive_rho: bool = False

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.rho <= 0 or self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("rho and tolerances must be positive")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class SolveResult:
    assignment: Interpretation
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    # grid oracle only: objective gap to the second-best grid point
    second_best_gap: Optional[float] = None

    def vector(self, program: GroundProgram) -> np.ndarray:
        return np.array([self.assignment[a] for a in program.variables])


def objective_vector(program: GroundProgram, y: np.ndarray) -> float:
    """Weighted hinge objective at y; +inf when a hard constraint is violated."""
    values = program.linear_values(y)
    hinges = np.maximum(values, 0.0)
    sq = program.exponent == 2
    if sq.any():
        hinges = np.where(sq, hinges * hinges, hinges)
    total = float(np.dot(program.weight, hinges))
    if not math.isfinite(total):
        raise NumericError("objective is not finite")
    if program.n_hard:
        if np.max(program.hard_values(y), initial=-np.inf) > HARD_FEASIBILITY_TOL:
            return math.inf
    return total


def objective(program: GroundProgram, assignment: Interpretation) -> float:
    """Objective at a full assignment of the target variables."""
    try:
        y = np.array([assignment[a] for a in program.variables], dtype=np.float64)
    except KeyError as err:
        raise MissingAtomError(f"assignment is missing target atom {err}") from None
    return objective_vector(program, y)


def solve_map(program: GroundProgram, config: SolverConfig = SolverConfig()) -> SolveResult:
    """Most-probable assignment of the program's target variables."""
    if program.n_variables == 0:
        return SolveResult(Interpretation({}), objective_vector(program, np.array([])),
                           0, 0.0, 0.0, True)
    if config.method == ADMM:
        y, iters, r_norm, s_norm, converged = _admm(program, config)
    elif config.method == PROJECTED_GRADIENT:
        y, iters, r_norm, s_norm, converged = _projected_gradient(program, config)
    else:
        return _grid_oracle(program, config)
    obj = objective_vector(program, y)
    if program.n_hard:
        converged = converged and (
            float(np.max(program.hard_values(y))) <= HARD_FEASIBILITY_TOL
        )
    assignment = Interpretation(
        {atom: float(v) for atom, v in zip(program.variables, y)}
    )
    return SolveResult(assignment, obj, iters, r_norm, s_norm, converged)


@dataclass
class _Blocks:
    """Soft potentials and hard constraints with nnz > 0, stacked."""

    indptr: np.ndarray
    var_idx: np.ndarray
    coef: np.ndarray
    const: np.ndarray
    weight: np.ndarray  # 0 for hard blocks (unused there)
    is_p2: np.ndarray
    is_hard: np.ndarray
    seg: np.ndarray  # block id per nnz entry
    a2: np.ndarray  # squared norm of each block's coefficient vector
    counts: np.ndarray


def _build_blocks(program: GroundProgram) -> Optional[_Blocks]:
    counts_soft = np.diff(program.indptr)
    counts_hard = np.diff(program.hard_indptr)
    live_soft = counts_soft > 0
    live_hard = counts_hard > 0
    if program.n_hard and not live_hard.all():
        bad = program.hard_constant[~live_hard]
        if np.max(bad, initial=-np.inf) > HARD_FEASIBILITY_TOL:
            raise DataError("a hard constraint with no free variables is violated")
    n_blocks = int(live_soft.sum() + live_hard.sum())
    if n_blocks == 0:
        return None
    var_idx = np.concatenate([program.var_idx, program.hard_var_idx])
    coef = np.concatenate([program.coef, program.hard_coef])
    counts = np.concatenate([counts_soft[live_soft], counts_hard[live_hard]])
    const = np.concatenate(
        [program.constant[live_soft], program.hard_constant[live_hard]]
    )
    weight = np.concatenate(
        [program.weight[live_soft], np.zeros(int(live_hard.sum()))]
    )
    is_p2 = np.concatenate(
        [
            (program.exponent == 2)[live_soft],
            np.zeros(int(live_hard.sum()), dtype=bool),
        ]
    )
    is_hard = np.concatenate(
        [np.zeros(int(live_soft.sum()), dtype=bool),
         np.ones(int(live_hard.sum()), dtype=bool)]
    )
    indptr = np.concatenate([[0], np.cumsum(counts)])
    seg = np.repeat(np.arange(n_blocks), counts)
    sq = coef * coef
    a2 = np.add.reduceat(sq, indptr[:-1])
    return _Blocks(indptr, var_idx, coef, const, weight, is_p2, is_hard, seg, a2, counts)


def _admm(program: GroundProgram, config: SolverConfig):
    n = program.n_variables
    y = np.full(n, 0.5)
    blocks = _build_blocks(program)
    if blocks is None:
        return y, 0, 0.0, 0.0, True
    rho = config.rho
    idx = blocks.var_idx
    coef = blocks.coef
    seg = blocks.seg
    nnz = len(idx)
    sqrt_nnz = math.sqrt(nnz)
    n_blocks = len(blocks.const)
    u = np.zeros(nnz)
    var_counts = np.bincount(idx, minlength=n).astype(np.float64)
    touched = var_counts > 0
    safe_counts = np.where(touched, var_counts, 1.0)

    w = blocks.weight
    a2 = blocks.a2
    p1 = ~blocks.is_p2 & ~blocks.is_hard
    p2 = blocks.is_p2
    hard = blocks.is_hard

    def rho_tables(rho):
        # per-block step size along the hinge normal for an active hinge:
        # p=1 potentials soft-threshold at min(w/rho, boundary), p=2 scale
        # linearly, hard constraints project onto the boundary
        p1_full = np.where(p1, w / rho, 0.0)
        p2_scale = np.where(p2, 2.0 * w / (rho + 2.0 * w * a2), 0.0)
        return p1_full, p2_scale

    p1_full, p2_scale = rho_tables(rho)
    inv_a2 = 1.0 / a2

    v = np.empty(nnz)
    prod = np.empty(nnz)
    x = np.empty(nnz)
    step_g = np.empty(nnz)
    step = np.empty(n_blocks)
    step_alt = np.empty(n_blocks)
    gathered = y[idx].copy()
    y_old = np.empty(n)

    iters = 0
    r_norm = s_norm = math.inf
    converged = False
    for iters in range(1, config.max_iterations + 1):
        np.subtract(gathered, u, out=v)
        np.multiply(coef, v, out=prod)
        dot = np.atleast_1d(np.add.reduceat(prod, blocks.indptr[:-1]))
        dot += blocks.const

        # step per block: 0 when the hinge is inactive at v
        np.multiply(dot, inv_a2, out=step)  # boundary projection distance
        np.minimum(step, p1_full, out=step_alt)
        np.copyto(step, step_alt, where=p1)
        if p2.any():
            np.multiply(dot, p2_scale, out=step_alt)
            np.copyto(step, step_alt, where=p2)
        step[dot <= 0.0] = 0.0

        np.take(step, seg, out=step_g)
        np.multiply(step_g, coef, out=prod)
        np.subtract(v, prod, out=x)

        np.copyto(y_old, y)
        np.add(x, u, out=prod)
        sums = np.bincount(idx, weights=prod, minlength=n)
        np.divide(sums, safe_counts, out=sums)
        np.copyto(y, sums, where=touched)
        np.clip(y, 0.0, 1.0, out=y)

        np.take(y, idx, out=gathered)
        np.subtract(x, gathered, out=prod)  # primal residual
        u += prod

        r_norm = math.sqrt(float(prod @ prod))
        dy = y - y_old
        s_norm = rho * math.sqrt(float((dy * dy) @ var_counts))
        x_norm = math.sqrt(float(x @ x))
        g_norm = math.sqrt(float((y * y) @ var_counts))
        eps_pri = sqrt_nnz * config.eps_abs + config.eps_rel * max(x_norm, g_norm)
        eps_dual = sqrt_nnz * config.eps_abs + config.eps_rel * rho * math.sqrt(
            float(u @ u)
        )
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if config.adaptive_rho and iters % 50 == 0:
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u /= 2.0
                p1_full, p2_scale = rho_tables(rho)
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                u *= 2.0
                p1_full, p2_scale = rho_tables(rho)
    return y, iters, r_norm, s_norm, converged


def _projected_gradient(program: GroundProgram, config: SolverConfig):
    if program.n_hard:
        raise CapabilityError("projected_gradient does not support hard constraints")
    n = program.n_variables
    y = np.full(n, 0.5)
    blocks = _build_blocks(program)
    if blocks is None:
        return y, 0, 0.0, 0.0, True

    w = blocks.weight
    a2 = blocks.a2
    p2 = blocks.is_p2
    p1 = ~p2

    def linear(z):
        return blocks.const + np.add.reduceat(
            blocks.coef * z[blocks.var_idx], blocks.indptr[:-1]
        )

    def smoothed(lin, mu):
        # Huber smoothing of the p=1 hinges; p=2 hinges are already smooth
        pos = np.maximum(lin, 0.0)
        huber = np.where(pos < mu, pos * pos / (2.0 * mu), pos - mu / 2.0)
        return float(np.sum(w * np.where(p2, pos * pos, huber)))

    def grad(lin, mu):
        slope = np.where(p2, 2.0 * w * np.maximum(lin, 0.0),
                         w * np.clip(lin / mu, 0.0, 1.0))
        return np.bincount(
            blocks.var_idx, weights=slope[blocks.seg] * blocks.coef, minlength=n
        )

    total_iters = 0
    mapping_norm = math.inf
    mus = [10.0 ** (-k) for k in range(2, 10)]
    L = max(float(np.sum(w * a2 * np.where(p2, 2.0, 1.0))), 1e-12)
    stage_cap = max(100, config.max_iterations // len(mus))
    for mu in mus:
        t = 1.0
        z = y.copy()
        y_prev = y.copy()
        f_prev = math.inf
        for _ in range(stage_cap):
            total_iters += 1
            lin_z = linear(z)
            f_z = smoothed(lin_z, mu)
            g = grad(lin_z, mu)
            # backtracking on the local curvature estimate
            while True:
                y_new = np.clip(z - g / L, 0.0, 1.0)
                d = y_new - z
                quad = f_z + float(g @ d) + 0.5 * L * float(d @ d)
                if smoothed(linear(y_new), mu) <= quad + 1e-15:
                    break
                L *= 2.0
            mapping_norm = L * float(np.linalg.norm(d))
            f_new = smoothed(linear(y_new), mu)
            if f_new > f_prev:
                t = 1.0  # function restart keeps momentum honest
            f_prev = f_new
            t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
            z = y_new + ((t - 1.0) / t_new) * (y_new - y_prev)
            moved = float(np.max(np.abs(y_new - y_prev), initial=0.0))
            y_prev = y_new
            t = t_new
            L *= 0.9
            if moved <= 1e-13 and mapping_norm <= 1e-9:
                break
        y = y_prev
    return y, total_iters, mapping_norm, 0.0, True


_GRID_CELL_CAP = 300_000_000


def _grid_oracle(program: GroundProgram, config: SolverConfig) -> SolveResult:
    """Exhaustive grid search.

    Every potential touches only its own few variables, so its hinge is
    evaluated once on the corresponding low-dimensional subgrid and
    broadcast-added into the full objective tensor. The winner (and the
    runner-up, which measures uniqueness) are re-evaluated in float64.
    """
    n = program.n_variables
    if n > 6:
        raise CapabilityError(
            f"grid_oracle supports at most 6 target variables, got {n}"
        )
    m = max(1, int(round(1.0 / config.grid_step)))
    if (m + 1) ** n > _GRID_CELL_CAP:
        raise CapabilityError(
            f"grid of {(m + 1) ** n} points is too large; increase grid_step"
        )
    axis = np.linspace(0.0, 1.0, m + 1)
    total = (m + 1) ** n

    shape = (m + 1,) * n
    vals = np.zeros(shape, dtype=np.float32)
    for j in range(program.n_potentials):
        lo, hi = program.indptr[j], program.indptr[j + 1]
        vi = program.var_idx[lo:hi]
        cf = program.coef[lo:hi]
        lin = np.array(program.constant[j], dtype=np.float64)
        for v, c in zip(vi, cf):
            sub_shape = [1] * n
            sub_shape[v] = m + 1
            lin = lin + c * axis.reshape(sub_shape)
        hinge = np.maximum(lin, 0.0)
        if program.exponent[j] == 2:
            hinge = hinge * hinge
        vals += (program.weight[j] * hinge).astype(np.float32)
    for j in range(program.n_hard):
        lo, hi = program.hard_indptr[j], program.hard_indptr[j + 1]
        lin = np.array(program.hard_constant[j], dtype=np.float64)
        for v, c in zip(program.hard_var_idx[lo:hi], program.hard_coef[lo:hi]):
            sub_shape = [1] * n
            sub_shape[v] = m + 1
            lin = lin + c * axis.reshape(sub_shape)
        vals[np.broadcast_to(lin > HARD_FEASIBILITY_TOL, shape)] = np.inf

    flat = vals.ravel()
    if len(flat) == 1:
        top = np.array([0])
    else:
        top = np.argpartition(flat, 1)[:2]
        top = top[np.argsort(flat[top], kind="stable")]

    def point_at(flat_idx: int) -> np.ndarray:
        return axis[np.array(np.unravel_index(flat_idx, shape))]

    best_point = point_at(int(top[0]))
    best_val = objective_vector(program, best_point)
    if not math.isfinite(best_val):
        raise NumericError("grid oracle found no feasible grid point")
    if len(top) > 1:
        second_val = objective_vector(program, point_at(int(top[1])))
        gap = second_val - best_val
    else:
        gap = math.inf
    assignment = Interpretation(
        {atom: float(v) for atom, v in zip(program.variables, best_point)}
    )
    return SolveResult(assignment, best_val, total, 0.0, 0.0, True, gap)
