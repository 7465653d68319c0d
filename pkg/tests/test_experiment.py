"""Cross-validation harness: folds, ablation, determinism, baselines."""

import pytest

from pslkit.baselines import baseline_upu
from pslkit.errors import DataError
from pslkit.experiment import (
    ExperimentConfig,
    ablate_evidence,
    baseline_experiment,
    make_folds,
    run_experiment,
)
from pslkit.profiles import CHARACTERISTICS, ProfileEvidence, build_prior_model
from pslkit.solve import SolverConfig
from pslkit.synth import SynthConfig, generate_synthetic

import numpy as np

FAST_SOLVER = SolverConfig(eps_abs=1e-4, eps_rel=1e-3, max_iterations=2000)


def small_data(seed=3):
    return generate_synthetic(
        SynthConfig(n_users=40, n_pages=60, likes_per_user=6, seed=seed)
    )


def test_folds_partition_users():
    users = [f"u{i}" for i in range(503)]
    folds = make_folds(users, 10, seed=7)
    assert len(folds) == 10
    seen = [u for fold in folds for u in fold]
    assert sorted(seen) == sorted(users)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [50] * 7 + [51] * 3


def test_fold_sizes_even_split():
    users = [f"u{i}" for i in range(500)]
    folds = make_folds(users, 10, seed=1)
    assert all(len(f) == 50 for f in folds)


def test_pinned_users_never_in_test():
    users = [f"u{i}" for i in range(30)]
    pinned = frozenset(users[:10])
    folds = make_folds(users, 5, seed=2, pinned=pinned)
    for fold in folds:
        assert not (set(fold) & pinned)
    assert sorted(u for f in folds for u in f) == users[10:]


def test_folds_depend_on_seed_but_are_stable():
    users = [f"u{i}" for i in range(40)]
    assert make_folds(users, 4, seed=5) == make_folds(users, 4, seed=5)
    assert make_folds(users, 4, seed=5) != make_folds(users, 4, seed=6)


def test_ablation_withholds_exact_fraction():
    ev, gold = small_data()
    test_users = sorted({u for (u, _) in gold})[:20]
    rng = np.random.default_rng(0)
    ablated = ablate_evidence(ev, test_users, "img", 0.4, rng)
    affected = {
        u
        for u in test_users
        if not any((u, c, "img") in ablated.predicts for c in CHARACTERISTICS)
    }
    assert len(affected) == 8  # exactly 40% of 20
    # txt untouched everywhere
    assert {k for k in ev.predicts if k[2] == "txt"} == {
        k for k in ablated.predicts if k[2] == "txt"
    }
    # non-test users untouched
    for (u, c, s) in ev.predicts:
        if u not in test_users:
            assert (u, c, s) in ablated.predicts


def test_rel_ablation_removes_likes_only():
    ev, gold = small_data()
    test_users = sorted({u for (u, _) in gold})[:10]
    rng = np.random.default_rng(0)
    ablated = ablate_evidence(ev, test_users, "rel", 0.2, rng)
    removed_users = {u for (u, _) in ev.likes} - {u for (u, _) in ablated.likes}
    assert len(removed_users) == 2
    assert removed_users <= set(test_users)
    assert ablated.predicts == ev.predicts


def test_experiment_end_to_end_prior_model():
    ev, gold = small_data()
    config = ExperimentConfig(folds=4, seed=11, solver=FAST_SOLVER)
    report = run_experiment(build_prior_model(), ev, gold, config)
    # a constant-score model classifies everyone positive: accuracy equals
    # the positive rate and AUC is undefined-free but ~0.5
    assert len(report.folds) == 4
    assert set(report.aggregate) == set(CHARACTERISTICS)
    users = {u for (u, _) in gold}
    assert {u for (u, _) in report.scores} == users
    for char in CHARACTERISTICS:
        assert 0.3 <= report.aggregate[char]["auc"] <= 0.7


def test_experiment_is_deterministic_across_thread_counts():
    ev, gold = small_data()
    base = ExperimentConfig(folds=3, seed=5, solver=FAST_SOLVER, threads=1)
    par = ExperimentConfig(folds=3, seed=5, solver=FAST_SOLVER, threads=2)
    r1 = run_experiment(build_prior_model(), ev, gold, base)
    r2 = run_experiment(build_prior_model(), ev, gold, par)
    assert r1.scores == r2.scores
    assert r1.aggregate == r2.aggregate


def test_single_class_fold_is_flagged_not_fatal():
    ev, _ = small_data()
    users = sorted({u for (u, _, _) in ev.predicts})
    # all-positive gold: AUC undefined everywhere, run must still finish
    gold = {(u, c): 1 for u in users for c in CHARACTERISTICS}
    config = ExperimentConfig(folds=3, seed=2, solver=FAST_SOLVER)
    report = run_experiment(build_prior_model(), ev, gold, config)
    for char in CHARACTERISTICS:
        assert report.aggregate[char]["auc"] is None
        assert report.aggregate[char]["defined_folds"] == 0
        assert report.aggregate[char]["accuracy"] is not None


def test_baseline_experiment_runs_same_folds():
    ev, gold = small_data()
    config = ExperimentConfig(folds=4, seed=11)
    report = baseline_experiment(
        lambda likes, train, test: baseline_upu(likes, train, test), ev, gold, config
    )
    assert len(report.folds) == 4
    folds = make_folds(sorted({u for (u, _) in gold}), 4, 11)
    assert [f for f, _ in report.folds] == folds


def test_config_validation():
    with pytest.raises(DataError):
        ExperimentConfig(folds=1)
    with pytest.raises(DataError):
        ExperimentConfig(ablation=("audio", 0.2))
    with pytest.raises(DataError):
        ExperimentConfig(ablation=("txt", 0.5))
    with pytest.raises(DataError):
        ExperimentConfig(threads=0)


def test_unknown_pinned_user_rejected():
    ev, gold = small_data()
    config = ExperimentConfig(folds=2, seed=0, pin_train=frozenset(["nobody"]))
    with pytest.raises(DataError):
        run_experiment(build_prior_model(), ev, gold, config)
