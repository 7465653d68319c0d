"""Model builders: rule counts, fixed points, symmetry, composability."""

import random
import warnings
from importlib import resources

import pytest

from pslkit.ground import EvidenceDB, ground
from pslkit.lang import load_model, parse_model, render_model
from pslkit.logic import GroundAtom
from pslkit.profiles import (
    CHARACTERISTICS,
    ProfileEvidence,
    build_direct_model,
    build_latent_model,
    build_prior_model,
    build_profile_model,
    build_source_model,
    evidence_to_db,
    profile_rule_counts,
)
from pslkit.solve import SolverConfig, solve_map
from pslkit.errors import DataError


def atom(pred, *args):
    return GroundAtom(pred, tuple(args))


def solve(model, db, **kwargs):
    return solve_map(ground(model, db), SolverConfig(**kwargs))


def test_rule_counts():
    assert len(build_prior_model().rules) == 14
    assert len(build_source_model("txt").rules) == 14
    assert len(build_source_model("img").rules) == 14
    assert len(build_direct_model().rules) == 28
    assert len(build_latent_model().rules) == 56
    assert len(build_profile_model().rules) == 84
    counts = profile_rule_counts()
    assert counts == {"pre_dedup": 84, "post_dedup": 84}


def test_profile_without_sources_is_latent():
    assert build_profile_model(sources=()).rules == build_latent_model().rules


def test_profile_single_source():
    model = build_profile_model(sources=("txt",))
    assert len(model.rules) == 14 + 56
    rendered = render_model(model)
    assert "Predicts(U, ext, txt) -> Is(U, ext)" in rendered
    assert "img" not in rendered


def test_source_model_contents():
    txt = render_model(build_source_model("txt"))
    assert "1.0 : Predicts(U, ext, txt) -> Is(U, ext)" in txt
    assert "1.0 : Is(U, ext) -> Predicts(U, ext, txt)" in txt
    img = render_model(build_source_model("img"))
    assert "1.0 : Predicts(U, fem, img) -> Is(U, fem)" in img
    assert "1.0 : Is(U, fem) -> Predicts(U, fem, img)" in img


def test_custom_source_is_accepted():
    model = build_source_model("audio")
    assert "Predicts(U, neu, audio)" in render_model(model)
    with pytest.raises(DataError):
        build_source_model("Audio")


def test_bundled_templates_match_builders():
    builders = {
        "prior": build_prior_model,
        "txt": lambda: build_source_model("txt"),
        "img": lambda: build_source_model("img"),
        "direct": build_direct_model,
        "latent": build_latent_model,
        "profile": build_profile_model,
    }
    for name, build in builders.items():
        path = resources.files("pslkit") / "models" / f"{name}.psl"
        assert load_model(path) == build()
    friendship = load_model(resources.files("pslkit") / "models" / "friendship.psl")
    assert len(friendship.rules) == 14


def make_training_population(n=100, positives=None):
    """Known users whose fem average is exactly positives/n."""
    if positives is None:
        positives = 61
    known = {}
    for i in range(n):
        user = f"train{i:03d}"
        for j, char in enumerate(CHARACTERISTICS):
            if char == "fem":
                known[(user, char)] = 1 if i < positives else 0
            else:
                known[(user, char)] = (i + j) % 2
    return known


def test_prior_model_reproduces_training_average():
    known = make_training_population()
    ev = ProfileEvidence(known_traits=known)
    assert ev.averages["fem"] == pytest.approx(0.61)
    model = build_prior_model()
    targets = {(u, c) for u in ("carol", "dave") for c in CHARACTERISTICS}
    db = evidence_to_db(ev, targets, model=model)
    result = solve(model, db)
    assert result.converged
    for user in ("carol", "dave"):
        for char in CHARACTERISTICS:
            value = result.assignment[atom("Is", user, char)]
            assert value == pytest.approx(ev.averages[char], abs=1e-3)
    assert result.assignment[atom("Is", "carol", "fem")] == pytest.approx(
        0.61, abs=1e-3
    )


def test_prior_model_with_zero_average():
    known = {(f"t{i}", c): 0 for i in range(10) for c in CHARACTERISTICS}
    ev = ProfileEvidence(known_traits=known)
    model = build_prior_model()
    db = evidence_to_db(ev, {("x", c) for c in CHARACTERISTICS}, model=model)
    result = solve(model, db)
    for char in CHARACTERISTICS:
        assert result.assignment[atom("Is", "x", char)] == pytest.approx(0.0, abs=1e-3)


def test_item_prior_in_isolation():
    # Average(fem) = 0.61 and the guard alone pin Represents(123, fem) at 0.61
    model = build_latent_model()
    observed = {atom("Average", c): 0.5 for c in CHARACTERISTICS}
    observed[atom("Average", "fem")] = 0.61
    observed[atom("Item", "123")] = 1.0
    targets = [atom("Represents", "123", c) for c in CHARACTERISTICS]
    result = solve(model, EvidenceDB(observed, targets))
    assert result.assignment[atom("Represents", "123", "fem")] == pytest.approx(
        0.61, abs=1e-3
    )
    fem_only = {atom("Average", "fem"): 0.61, atom("Item", "123"): 1.0}
    oracle = solve_map(
        ground(model, EvidenceDB(fem_only, [atom("Represents", "123", "fem")])),
        SolverConfig(method="grid_oracle", grid_step=1e-2),
    )
    assert oracle.assignment[atom("Represents", "123", "fem")] == pytest.approx(0.61)


def test_direct_model_pulls_target_above_average():
    model = build_direct_model()
    known = {("a", c): 1 for c in CHARACTERISTICS}
    known.update({(f"pad{i}", c): i % 2 for i in range(2) for c in CHARACTERISTICS})
    ev = ProfileEvidence(
        likes={("a", "p"): 1.0, ("b", "p"): 1.0},
        known_traits=known,
    )
    db = evidence_to_db(ev, {("b", c) for c in CHARACTERISTICS}, model=model)
    program = ground(model, db)
    result = solve_map(program)
    for char in CHARACTERISTICS:
        assert result.assignment[atom("Is", "b", char)] > ev.averages[char]


def test_direct_model_without_shared_pages_is_the_prior():
    model = build_direct_model()
    known = make_training_population(n=20, positives=13)
    ev = ProfileEvidence(
        likes={("b", "solo"): 1.0},
        known_traits=known,
    )
    db = evidence_to_db(ev, {("b", c) for c in CHARACTERISTICS}, model=model)
    result = solve_map(ground(model, db))
    for char in CHARACTERISTICS:
        assert result.assignment[atom("Is", "b", char)] == pytest.approx(
            ev.averages[char], abs=1e-3
        )


def test_latent_symmetric_pull_is_neutral():
    model = build_latent_model()
    known = {}
    for char in CHARACTERISTICS:
        known[("hi", char)] = 1
        known[("lo", char)] = 0
    ev = ProfileEvidence(
        likes={("hi", "p"): 1.0, ("lo", "p"): 1.0},
        known_traits=known,
    )
    db = evidence_to_db(ev, set(), model=model)
    result = solve_map(ground(model, db))
    for char in CHARACTERISTICS:
        assert result.assignment[atom("Represents", "p", char)] == pytest.approx(
            0.5, abs=1e-3
        )


def test_source_model_monotone_evidence_pull():
    model = build_source_model("txt")
    previous = -1.0
    for step in range(11):
        score = step / 10
        ev = ProfileEvidence(predicts={("u", "ext", "txt"): score})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            db = evidence_to_db(ev, {("u", "ext")}, model=model)
        result = solve_map(ground(model, db))
        value = result.assignment[atom("Is", "u", "ext")]
        assert value >= previous - 1e-9
        previous = value


def test_latent_label_complement_symmetry():
    rng = random.Random(77)
    users = [f"u{i}" for i in range(8)]
    pages = [f"p{i}" for i in range(5)]
    likes = {}
    for u in users:
        for p in rng.sample(pages, 2):
            likes[(u, p)] = 1.0
    known = {(u, c): rng.randint(0, 1) for u in users[:4] for c in CHARACTERISTICS}
    targets = {(u, c) for u in users[4:] for c in CHARACTERISTICS}
    model = build_latent_model()

    ev = ProfileEvidence(likes=likes, known_traits=known)
    flipped = ProfileEvidence(
        likes=likes, known_traits={k: 1 - v for k, v in known.items()}
    )
    base = solve_map(ground(model, evidence_to_db(ev, targets, model=model)))
    comp = solve_map(ground(model, evidence_to_db(flipped, targets, model=model)))
    for a, value in base.assignment.items():
        assert comp.assignment[a] == pytest.approx(1.0 - value, abs=2e-3)


def test_profile_grounding_is_union_of_constituents():
    rng = random.Random(5)
    users = [f"u{i}" for i in range(6)]
    pages = [f"p{i}" for i in range(4)]
    likes = {(u, rng.choice(pages)): 1.0 for u in users}
    predicts = {
        (u, c, s): rng.random()
        for u in users
        for c in CHARACTERISTICS
        for s in ("txt", "img")
    }
    known = {(u, c): rng.randint(0, 1) for u in users[:3] for c in CHARACTERISTICS}
    targets = {(u, c) for u in users[3:] for c in CHARACTERISTICS}
    ev = ProfileEvidence(predicts=predicts, likes=likes, known_traits=known)

    profile = build_profile_model()
    combined = ground(profile, evidence_to_db(ev, targets, model=profile))

    def signatures(program):
        sig = []
        for i in range(program.n_potentials):
            pot = program.potential(i)
            coefs = tuple(
                sorted(
                    (program.variables[v], c) for v, c in pot.coefficients.items()
                )
            )
            sig.append((pot.weight, pot.exponent, round(pot.constant, 12), coefs))
        return sorted(sig)

    parts = []
    for build in (
        lambda: build_source_model("txt"),
        lambda: build_source_model("img"),
        build_latent_model,
    ):
        part_model = build()
        part_db = evidence_to_db(ev, targets, model=part_model)
        parts.extend(signatures(ground(part_model, part_db)))
    assert signatures(combined) == sorted(parts)


def test_evidence_to_db_emits_expected_atoms():
    ev = ProfileEvidence(
        predicts={("u", "fem", "txt"): 0.7},
        likes={("u", "p1"): 1.0, ("u", "p2"): 0.5},
        known_traits={},
    )
    model = build_latent_model()
    db = evidence_to_db(ev, {("u", c) for c in CHARACTERISTICS}, model=model)
    is_targets = [a for a in db.targets if a.predicate == "Is"]
    rep_targets = [a for a in db.targets if a.predicate == "Represents"]
    assert len(is_targets) == 7
    assert len(rep_targets) == 14
    averages = [a for a, _ in db.observed.items() if a.predicate == "Average"]
    assert len(averages) == 7
    assert db.observed[atom("User", "u")] == 1.0
    assert db.observed[atom("Item", "p1")] == 1.0
    # latent model declares no Predicts; the atom must not leak through
    assert all(a.predicate != "Predicts" for a, _ in db.observed.items())

    txt_db = evidence_to_db(ev, set(), model=build_source_model("txt"))
    assert all(a.predicate != "Likes" for a, _ in txt_db.observed.items())
    assert txt_db.observed[atom("Predicts", "u", "fem", "txt")] == 0.7


def test_evidence_to_db_warns_on_contentless_target():
    ev = ProfileEvidence(known_traits={("a", c): 1 for c in CHARACTERISTICS})
    with pytest.warns(UserWarning, match="ghost"):
        evidence_to_db(ev, {("ghost", "fem")}, model=build_prior_model())


def test_profile_evidence_validation():
    with pytest.raises(DataError):
        ProfileEvidence(predicts={("u", "bad", "txt"): 0.5})
    with pytest.raises(DataError):
        ProfileEvidence(predicts={("u", "fem", "txt"): 1.5})
    with pytest.raises(DataError):
        ProfileEvidence(likes={("u", "p"): 0.0})
    with pytest.raises(DataError):
        ProfileEvidence(known_traits={("u", "fem"): 2})
    with pytest.raises(DataError):
        ProfileEvidence(
            known_traits={("u", "fem"): 1},
            averages={c: 0.0 for c in CHARACTERISTICS},
        )
    ev = ProfileEvidence(known_traits={("u", "fem"): 1})
    assert ev.averages["fem"] == 1.0
    assert ev.averages["neu"] == 0.5
