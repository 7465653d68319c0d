"""Command-line interface.

Subcommands: ground, infer, eval, synth, experiment, baselines. Exit codes:
0 success, 1 usage error, 2 data error (malformed models or files), 3
resource or convergence error. All randomness sits behind --seed; rerunning
any subcommand with identical inputs and flags reproduces its outputs byte
for byte.
"""

import argparse
import sys
from importlib import resources

from . import __version__
from .baselines import baseline_average, baseline_knn, baseline_upu
from .errors import (
    CapabilityError,
    DataError,
    GroundingCapError,
    ModelSyntaxError,
    MissingAtomError,
    NumericError,
    PslError,
)
from .experiment import ExperimentConfig, run_experiment, baseline_experiment
from .ground import DEFAULT_GROUNDING_CAP, count_potentials, ground
from .lang import load_model
from .metrics import compute_report
from .profiles import evidence_to_db
from .solve import SolverConfig, solve_map
from .synth import SynthConfig, generate_synthetic
from . import tsv

USAGE_ERROR, DATA_ERROR, RESOURCE_ERROR = 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _solver_flags(sub):
    sub.add_argument("--solver", default="admm",
                     choices=["admm", "projected_gradient", "grid_oracle"])
    sub.add_argument("--rho", type=float, default=1.0)
    sub.add_argument("--max-iter", type=int, default=25000)
    sub.add_argument("--eps-abs", type=float, default=1e-5)
    sub.add_argument("--eps-rel", type=float, default=1e-4)
    sub.add_argument("--grid-step", type=float, default=1e-3)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        method=args.solver,
        rho=args.rho,
        max_iterations=args.max_iter,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        grid_step=args.grid_step,
        seed=getattr(args, "seed", 0),
    )


def _load_model_arg(path):
    bundled = resources.files("pslkit") / "models" / f"{path}.psl"
    if "/" not in str(path) and not str(path).endswith(".psl") and bundled.is_file():
        return load_model(bundled)
    return load_model(path)


def build_parser() -> _Parser:
    parser = _Parser(prog="pslkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pslkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("ground", help="compile a model against evidence")
    g.add_argument("--model", required=True)
    g.add_argument("--evidence", required=True)
    g.add_argument("--targets", required=True)
    g.add_argument("--dump-ground", help="write the full potential dump here")
    g.add_argument("--max-potentials", type=int, default=DEFAULT_GROUNDING_CAP)

    i = sub.add_parser("infer", help="MAP inference over target atoms")
    i.add_argument("--model", required=True)
    i.add_argument("--evidence", required=True)
    i.add_argument("--targets", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--max-potentials", type=int, default=DEFAULT_GROUNDING_CAP)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--threads", type=int, default=1)
    _solver_flags(i)

    e = sub.add_parser("eval", help="score predictions against gold labels")
    e.add_argument("--pred", required=True)
    e.add_argument("--gold", required=True)
    e.add_argument("--out")

    s = sub.add_parser("synth", help="generate a synthetic population")
    s.add_argument("--users", type=int, default=500)
    s.add_argument("--pages", type=int, default=2000)
    s.add_argument("--likes", type=int, default=40)
    s.add_argument("--noise-txt", type=float, default=0.35)
    s.add_argument("--noise-img", type=float, default=0.35)
    s.add_argument("--affinity", type=float, default=0.6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)

    x = sub.add_parser("experiment", help="cross-validated model evaluation")
    x.add_argument("--model", required=True)
    x.add_argument("--evidence", required=True)
    x.add_argument("--gold", required=True)
    x.add_argument("--folds", type=int, default=10)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--ablate-source", choices=["txt", "img", "rel"])
    x.add_argument("--ablate-fraction", type=float,
                   choices=[0.2, 0.4, 0.6, 0.8])
    x.add_argument("--pin-train", help="file of user ids never placed in a test fold")
    x.add_argument("--min-page-likes", type=int, default=3)
    x.add_argument("--threads", type=int, default=1)
    x.add_argument("--max-potentials", type=int, default=DEFAULT_GROUNDING_CAP)
    x.add_argument("--out")
    x.add_argument("--out-scores")
    _solver_flags(x)

    b = sub.add_parser("baselines", help="cross-validated relational baselines")
    b.add_argument("--method", required=True, choices=["average", "upu", "knn"])
    b.add_argument("--evidence", required=True)
    b.add_argument("--gold", required=True)
    b.add_argument("--folds", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--min-page-likes", type=int, default=3)
    b.add_argument("--out")
    b.add_argument("--out-scores")
    return parser


def _cmd_ground(args) -> int:
    model = _load_model_arg(args.model)
    db = tsv.read_evidence_db(args.evidence, args.targets)
    program = ground(model, db, max_potentials=args.max_potentials)
    print("rule\tpre_prune\tpost_prune")
    for rule_id in range(len(model.rules)):
        counts = program.rule_counts[rule_id]
        print(f"{rule_id}\t{count_potentials(program, rule_id)}\t{counts.post_prune}")
    total_pre = sum(c.pre_prune for c in program.rule_counts)
    print(f"total\t{total_pre}\t{program.n_potentials + program.n_hard}")
    if args.dump_ground:
        with open(args.dump_ground, "w", encoding="utf-8") as fh:
            fh.write(program.dump_tsv())
    return 0


def _cmd_infer(args) -> int:
    model = _load_model_arg(args.model)
    db = tsv.read_evidence_db(args.evidence, args.targets)
    program = ground(model, db, max_potentials=args.max_potentials)
    result = solve_map(program, _solver_config(args))
    if not result.converged:
        print(
            f"error: solver stopped after {result.iterations} iterations "
            f"without converging (primal {result.primal_residual:.3g}, "
            f"dual {result.dual_residual:.3g})",
            file=sys.stderr,
        )
        return RESOURCE_ERROR
    tsv.write_scores(args.out, result.assignment)
    print(
        f"solved {program.n_variables} targets in {result.iterations} iterations, "
        f"objective {result.objective!r}"
    )
    return 0


def _cmd_eval(args) -> int:
    scores = tsv.read_scores(args.pred)
    gold = tsv.read_gold(args.gold)
    common = {k: v for k, v in scores.items() if k in gold}
    if not common:
        raise DataError("no overlap between predictions and gold labels")
    report = compute_report(common, {k: gold[k] for k in common})
    text = tsv.format_metrics_tsv(report)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def _cmd_synth(args) -> int:
    import os

    config = SynthConfig(
        n_users=args.users,
        n_pages=args.pages,
        likes_per_user=args.likes,
        source_noise={"txt": args.noise_txt, "img": args.noise_img},
        trait_page_affinity=args.affinity,
        seed=args.seed,
    )
    evidence, gold = generate_synthetic(config)
    os.makedirs(args.out_dir, exist_ok=True)
    tsv.write_evidence(
        os.path.join(args.out_dir, "evidence.tsv"),
        tsv.evidence_rows_from_profile(evidence),
    )
    tsv.write_gold(os.path.join(args.out_dir, "gold.tsv"), gold)
    print(
        f"wrote {len(evidence.predicts)} predictions, {len(evidence.likes)} likes, "
        f"{len(gold)} gold labels to {args.out_dir}"
    )
    return 0


def _read_pin_train(path) -> frozenset:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def _cmd_experiment(args) -> int:
    if (args.ablate_source is None) != (args.ablate_fraction is None):
        raise _UsageError("--ablate-source and --ablate-fraction go together")
    model = _load_model_arg(args.model)
    evidence = tsv.profile_from_evidence_rows(tsv.read_evidence(args.evidence))
    if args.min_page_likes > 1:
        from dataclasses import replace

        evidence = replace(
            evidence, likes=tsv.filter_page_degree(evidence.likes, args.min_page_likes)
        )
    gold = tsv.read_gold(args.gold)
    ablation = None
    if args.ablate_source is not None:
        ablation = (args.ablate_source, args.ablate_fraction)
    config = ExperimentConfig(
        folds=args.folds,
        seed=args.seed,
        ablation=ablation,
        solver=_solver_config(args),
        pin_train=_read_pin_train(args.pin_train) if args.pin_train else frozenset(),
        threads=args.threads,
        max_potentials=args.max_potentials,
    )
    report = run_experiment(model, evidence, gold, config)
    text = tsv.format_report_tsv(report)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.out_scores:
        tsv.write_user_scores(args.out_scores, report.scores)
    return 0


def _cmd_baselines(args) -> int:
    evidence = tsv.profile_from_evidence_rows(tsv.read_evidence(args.evidence))
    if args.min_page_likes > 1:
        from dataclasses import replace

        evidence = replace(
            evidence, likes=tsv.filter_page_degree(evidence.likes, args.min_page_likes)
        )
    gold = tsv.read_gold(args.gold)
    if args.method == "average":
        scorer = lambda likes, train, test: baseline_average(train, test)
    elif args.method == "upu":
        scorer = baseline_upu
    else:
        scorer = lambda likes, train, test: baseline_knn(likes, train, test, k=args.k)
    config = ExperimentConfig(folds=args.folds, seed=args.seed)
    report = baseline_experiment(scorer, evidence, gold, config)
    text = tsv.format_report_tsv(report)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.out_scores:
        tsv.write_user_scores(args.out_scores, report.scores)
    return 0


_COMMANDS = {
    "ground": _cmd_ground,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "experiment": _cmd_experiment,
    "baselines": _cmd_baselines,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return USAGE_ERROR
    except (GroundingCapError, CapabilityError, NumericError) as err:
        print(f"resource error: {err}", file=sys.stderr)
        return RESOURCE_ERROR
    except (DataError, ModelSyntaxError, MissingAtomError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return DATA_ERROR
    except PslError as err:
        print(f"error: {err}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
