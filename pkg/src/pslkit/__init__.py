"""Probabilistic soft logic toolkit.

Weighted first-order rules compile into hinge-loss potentials over [0,1]
truth values; MAP inference solves the resulting convex program with
consensus ADMM. On top of the engine sit the bundled multi-source
user-profiling models, relational baselines, an evaluation harness, and
scikit-learn style estimators.
"""

__version__ = "0.1.0"

from .baselines import (
    baseline_average,
    baseline_knn,
    baseline_upu,
    ensemble_majority,
)
from .errors import (
    CapabilityError,
    DataError,
    DomainError,
    GroundingCapError,
    MissingAtomError,
    ModelSyntaxError,
    NumericError,
    PslError,
)
from .estimators import AverageBaseline, SharedPagesKNN, TraitProfiler, UserPageUser
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    baseline_experiment,
    make_folds,
    run_experiment,
)
from .ground import EvidenceDB, GroundProgram, HingeLossPotential, count_potentials, ground
from .lang import ModelFile, load_model, parse_model, render_model
from .logic import (
    HARD,
    Constant,
    GroundAtom,
    Interpretation,
    Literal,
    PredicateDecl,
    Rule,
    Variable,
    distance_to_satisfaction,
    literal_value,
    luk_and,
    luk_not,
    luk_or,
)
from .metrics import CharacteristicMetrics, MetricsReport, compute_metrics, compute_report
from .profiles import (
    CHARACTERISTICS,
    SOURCES,
    ProfileEvidence,
    build_direct_model,
    build_latent_model,
    build_prior_model,
    build_profile_model,
    build_source_model,
    evidence_to_db,
)
from .solve import SolveResult, SolverConfig, objective, solve_map
from .synth import SynthConfig, generate_synthetic

__all__ = [
    "AverageBaseline",
    "CapabilityError",
    "CharacteristicMetrics",
    "CHARACTERISTICS",
    "Constant",
    "DataError",
    "DomainError",
    "EvidenceDB",
    "ExperimentConfig",
    "ExperimentReport",
    "GroundAtom",
    "GroundProgram",
    "GroundingCapError",
    "HARD",
    "HingeLossPotential",
    "Interpretation",
    "Literal",
    "MetricsReport",
    "MissingAtomError",
    "ModelFile",
    "ModelSyntaxError",
    "NumericError",
    "PredicateDecl",
    "ProfileEvidence",
    "PslError",
    "Rule",
    "SharedPagesKNN",
    "SolveResult",
    "SolverConfig",
    "SOURCES",
    "SynthConfig",
    "TraitProfiler",
    "UserPageUser",
    "Variable",
    "baseline_average",
    "baseline_experiment",
    "baseline_knn",
    "baseline_upu",
    "build_direct_model",
    "build_latent_model",
    "build_prior_model",
    "build_profile_model",
    "build_source_model",
    "compute_metrics",
    "compute_report",
    "count_potentials",
    "distance_to_satisfaction",
    "ensemble_majority",
    "evidence_to_db",
    "generate_synthetic",
    "ground",
    "literal_value",
    "load_model",
    "luk_and",
    "luk_not",
    "luk_or",
    "make_folds",
    "objective",
    "parse_model",
    "render_model",
    "run_experiment",
    "solve_map",
]
