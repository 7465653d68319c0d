"""Cross-validation experiments: folds, ablations, per-fold inference, reports.

Users are split into k test folds by a seeded shuffle; in each fold every
other user's labels enter the evidence (and the per-characteristic averages
are recomputed from exactly those training users), the fold's users become
inference targets, and the solved scores are evaluated per characteristic.
An optional ablation withholds one evidence source (txt, img, or rel) from
a seeded fraction of each test fold; gold labels and fold membership are
never touched. Folds are independent, so they may run in a process pool;
results are merged in fold order, making the whole pipeline a pure function
of (inputs, flags, seed) at any worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DataError
from .ground import ground
from .lang import ModelFile
from .logic import GroundAtom
from .metrics import CharacteristicMetrics, MetricsReport, compute_report
from .profiles import CHARACTERISTICS, ProfileEvidence, evidence_to_db
from .solve import SolverConfig, solve_map

ABLATABLE_SOURCES = ("txt", "img", "rel")
ABLATION_FRACTIONS = (0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class ExperimentConfig:
    folds: int = 10
    seed: int = 0
    ablation: Optional[tuple] = None  # (source, fraction)
    solver: SolverConfig = field(default_factory=SolverConfig)
    pin_train: frozenset = frozenset()
    threads: int = 1
    max_potentials: int = 50_000_000

    def __post_init__(self):
        if self.folds < 2:
            raise DataError("need at least 2 folds")
        if self.threads < 1:
            raise DataError("threads must be positive")
        if self.ablation is not None:
            source, fraction = self.ablation
            if source not in ABLATABLE_SOURCES:
                raise DataError(f"ablation source must be one of {ABLATABLE_SOURCES}")
            if fraction not in ABLATION_FRACTIONS:
                raise DataError(f"ablation fraction must be one of {ABLATION_FRACTIONS}")


@dataclass
class ExperimentReport:
    folds: list  # list of (test_users, MetricsReport)
    aggregate: dict  # characteristic -> {metric: mean over defined folds}
    scores: dict  # (user, characteristic) -> score, pooled over test folds

    def table_rows(self):
        """Flat rows (characteristic, fold, acc, auc, pr+, pr-, n+, n-)."""
        rows = []
        for fold_idx, (_, report) in enumerate(self.folds):
            for char in sorted(report.per_characteristic):
                m = report[char]
                rows.append((char, str(fold_idx), m.accuracy, m.auc, m.pr_pos,
                             m.pr_neg, m.n_pos, m.n_neg))
        for char in sorted(self.aggregate):
            agg = self.aggregate[char]
            rows.append((char, "mean", agg.get("accuracy"), agg.get("auc"),
                         agg.get("pr_pos"), agg.get("pr_neg"),
                         agg.get("n_pos"), agg.get("n_neg")))
        return rows


def make_folds(users, n_folds: int, seed: int, pinned=frozenset()):
    """Partition the non-pinned users into n_folds seeded test folds."""
    foldable = sorted(u for u in users if u not in pinned)
    if len(foldable) < n_folds:
        raise DataError("fewer foldable users than folds")
    order = np.random.default_rng(seed).permutation(len(foldable))
    shuffled = [foldable[i] for i in order]
    base, extra = divmod(len(shuffled), n_folds)
    folds = []
    at = 0
    for k in range(n_folds):
        size = base + (1 if k < extra else 0)
        folds.append(sorted(shuffled[at:at + size]))
        at += size
    return folds


def ablate_evidence(evidence: ProfileEvidence, test_users, source: str,
                    fraction: float, rng) -> ProfileEvidence:
    """Withhold one source's atoms from a seeded fraction of the test users."""
    pool = sorted(test_users)
    k = int(round(fraction * len(pool)))
    chosen = set(rng.choice(pool, size=k, replace=False)) if k else set()
    if source == "rel":
        likes = {
            (u, p): v for (u, p), v in evidence.likes.items() if u not in chosen
        }
        return replace(evidence, likes=likes)
    predicts = {
        (u, c, s): v
        for (u, c, s), v in evidence.predicts.items()
        if not (s == source and u in chosen)
    }
    return replace(evidence, predicts=predicts)


def run_fold(model: ModelFile, evidence: ProfileEvidence, gold: dict,
             train_users, test_users, config: ExperimentConfig, fold_idx: int):
    """Ground and solve one fold; returns (scores, MetricsReport)."""
    known = {
        (u, c): gold[(u, c)]
        for u in train_users
        for c in CHARACTERISTICS
        if (u, c) in gold
    }
    fold_ev = ProfileEvidence(
        predicts=evidence.predicts, likes=evidence.likes, known_traits=known
    )
    if config.ablation is not None:
        source, fraction = config.ablation
        rng = np.random.default_rng([config.seed, fold_idx, 0xAB1A7E])
        fold_ev = ablate_evidence(fold_ev, test_users, source, fraction, rng)
    targets = {(u, c) for u in test_users for c in CHARACTERISTICS}
    db = evidence_to_db(fold_ev, targets, model=model)
    program = ground(model, db, max_potentials=config.max_potentials)
    result = solve_map(program, config.solver)
    scores = {}
    for u, c in targets:
        scores[(u, c)] = result.assignment[GroundAtom("Is", (u, c))]
    fold_gold = {(u, c): gold[(u, c)] for (u, c) in targets if (u, c) in gold}
    report = compute_report(
        {k: v for k, v in scores.items() if k in fold_gold}, fold_gold
    )
    return scores, report


def _fold_worker(payload):
    model, evidence, gold, train, test, config, fold_idx = payload
    return run_fold(model, evidence, gold, train, test, config, fold_idx)


def aggregate_reports(reports) -> dict:
    """Mean of each metric per characteristic over the folds where defined."""
    out = {}
    chars = sorted({c for r in reports for c in r.per_characteristic})
    for char in chars:
        per_metric = {}
        for metric in ("accuracy", "auc", "pr_pos", "pr_neg", "n_pos", "n_neg"):
            values = [
                getattr(r[char], metric)
                for r in reports
                if char in r.per_characteristic and getattr(r[char], metric) is not None
            ]
            per_metric[metric] = sum(values) / len(values) if values else None
        per_metric["defined_folds"] = sum(
            1 for r in reports if char in r.per_characteristic and r[char].defined
        )
        out[char] = per_metric
    return out


def run_experiment(model: ModelFile, evidence: ProfileEvidence, gold: dict,
                   config: ExperimentConfig) -> ExperimentReport:
    """Full k-fold experiment; deterministic for fixed inputs and seed."""
    users = sorted({u for (u, _) in gold})
    if not users:
        raise DataError("gold labels are empty")
    missing = [u for u in config.pin_train if u not in set(users)]
    if missing:
        raise DataError(f"pinned user {missing[0]} has no gold labels")
    folds = make_folds(users, config.folds, config.seed, config.pin_train)
    payloads = []
    for fold_idx, test in enumerate(folds):
        test_set = set(test)
        train = [u for u in users if u not in test_set]
        payloads.append((model, evidence, gold, train, test, config, fold_idx))
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_fold_worker, payloads))
    else:
        results = [_fold_worker(p) for p in payloads]
    fold_reports = []
    pooled = {}
    for (test, payload_result) in zip(folds, results):
        scores, report = payload_result
        fold_reports.append((test, report))
        pooled.update(scores)
    aggregate = aggregate_reports([r for _, r in fold_reports])
    return ExperimentReport(fold_reports, aggregate, pooled)


def evaluate_scores_by_fold(scores: dict, gold: dict, folds) -> ExperimentReport:
    """Metric report for externally produced scores under the same folds."""
    fold_reports = []
    for test in folds:
        keys = {(u, c) for u in test for c in CHARACTERISTICS if (u, c) in gold}
        fold_scores = {k: scores[k] for k in keys}
        fold_gold = {k: gold[k] for k in keys}
        fold_reports.append((test, compute_report(fold_scores, fold_gold)))
    aggregate = aggregate_reports([r for _, r in fold_reports])
    return ExperimentReport(fold_reports, aggregate, dict(scores))


def baseline_experiment(scorer, evidence: ProfileEvidence, gold: dict,
                        config: ExperimentConfig) -> ExperimentReport:
    """Cross-validate a per-characteristic baseline scorer.

    `scorer(likes_edges, train_labels, test_users)` produces scores for one
    characteristic; it runs per fold and per characteristic on the same
    folds the model experiments use.
    """
    users = sorted({u for (u, _) in gold})
    folds = make_folds(users, config.folds, config.seed, config.pin_train)
    likes_edges = sorted(evidence.likes)
    fold_reports = []
    pooled = {}
    for test in folds:
        test_set = set(test)
        scores = {}
        fold_gold = {}
        for char in CHARACTERISTICS:
            train_labels = {
                u: gold[(u, char)]
                for u in users
                if u not in test_set and (u, char) in gold
            }
            testable = [u for u in test if (u, char) in gold]
            for u, s in scorer(likes_edges, train_labels, testable).items():
                scores[(u, char)] = s
                fold_gold[(u, char)] = gold[(u, char)]
        pooled.update(scores)
        fold_reports.append((test, compute_report(scores, fold_gold)))
    aggregate = aggregate_reports([r for _, r in fold_reports])
    return ExperimentReport(fold_reports, aggregate, pooled)
