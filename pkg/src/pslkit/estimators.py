"""Scikit-learn style estimators wrapping the inference engine.

TraitProfiler is transductive: fit() takes the population's evidence plus
the known labels, predict() grounds and solves for the requested users
jointly with everything seen at fit time. The relational baselines follow
the same fit/predict surface one characteristic at a time. All estimators
are clonable (plain keyword parameters, get_params/set_params inherited
from sklearn's BaseEstimator).
"""

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .baselines import baseline_average, baseline_knn, baseline_upu
from .errors import DataError
from .ground import ground
from .lang import ModelFile
from .logic import GroundAtom
from .profiles import (
    BUILDERS,
    CHARACTERISTICS,
    ProfileEvidence,
    build_profile_model,
    evidence_to_db,
)
from .solve import SolverConfig, solve_map


def check_labels(y) -> dict:
    """Validate a {user: 0/1} mapping."""
    labels = dict(y)
    for user, label in labels.items():
        if label not in (0, 1):
            raise DataError(f"label for {user} must be 0 or 1")
    return labels


def check_trait_labels(y) -> dict:
    """Validate a {(user, characteristic): 0/1} mapping."""
    labels = dict(y)
    for key, label in labels.items():
        if not (isinstance(key, tuple) and len(key) == 2):
            raise DataError("trait labels are keyed by (user, characteristic)")
        if key[1] not in CHARACTERISTICS:
            raise DataError(f"unknown characteristic {key[1]!r}")
        if label not in (0, 1):
            raise DataError(f"label for {key} must be 0 or 1")
    return labels


def check_likes(likes) -> list:
    """Validate (user, page) edges; accepts dicts with strengths too."""
    if isinstance(likes, dict):
        edges = sorted(likes)
    else:
        edges = sorted(likes)
    for edge in edges:
        if not (isinstance(edge, tuple) and len(edge) == 2):
            raise DataError("likes are (user, page) pairs")
    return edges


class TraitProfiler(BaseEstimator):
    """MAP inference of user characteristics from multi-source evidence.

    Parameters
    ----------
    model : str or ModelFile, default "profile"
        One of the bundled model names (prior, txt, img, direct, latent,
        profile) or an already parsed ModelFile.
    threshold : float, default 0.5
        Binarization threshold used by predict().
    solver, rho, max_iter, eps_abs, eps_rel, seed
        Passed through to the MAP solver.
    """

    def __init__(self, model="profile", threshold=0.5, solver="admm", rho=1.0,
                 max_iter=25000, eps_abs=1e-5, eps_rel=1e-4, seed=0):
        self.model = model
        self.threshold = threshold
        self.solver = solver
        self.rho = rho
        self.max_iter = max_iter
        self.eps_abs = eps_abs
        self.eps_rel = eps_rel
        self.seed = seed

    def _model_file(self) -> ModelFile:
        if isinstance(self.model, ModelFile):
            return self.model
        if self.model in BUILDERS:
            return BUILDERS[self.model]()
        raise DataError(
            f"model must be a ModelFile or one of {sorted(BUILDERS)}"
        )

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            method=self.solver,
            rho=self.rho,
            max_iterations=self.max_iter,
            eps_abs=self.eps_abs,
            eps_rel=self.eps_rel,
            seed=self.seed,
        )

    def fit(self, X, y):
        """Store the population evidence and the known trait labels.

        X is a ProfileEvidence (its known_traits are ignored in favor of y);
        y maps (user, characteristic) to a binary label.
        """
        if not isinstance(X, ProfileEvidence):
            raise DataError("X must be a ProfileEvidence")
        labels = check_trait_labels(y)
        self.model_ = self._model_file()
        self.evidence_ = ProfileEvidence(
            predicts=X.predicts, likes=X.likes, known_traits=labels
        )
        self.classes_ = (0, 1)
        return self

    def _check_fitted(self):
        if not hasattr(self, "evidence_"):
            raise NotFittedError("fit must run before predict")

    def predict_scores(self, users) -> dict:
        """MAP truth value per (user, characteristic) for the given users."""
        self._check_fitted()
        users = sorted(set(users))
        known = self.evidence_.known_traits
        targets = {
            (u, c)
            for u in users
            for c in CHARACTERISTICS
            if (u, c) not in known
        }
        db = evidence_to_db(self.evidence_, targets, model=self.model_)
        result = solve_map(ground(self.model_, db), self._solver_config())
        scores = {}
        for u in users:
            for c in CHARACTERISTICS:
                if (u, c) in known:
                    scores[(u, c)] = float(known[(u, c)])
                else:
                    scores[(u, c)] = result.assignment[GroundAtom("Is", (u, c))]
        return scores

    def predict(self, users) -> dict:
        """Binary labels per (user, characteristic) at the threshold."""
        return {
            key: 1 if score >= self.threshold else 0
            for key, score in self.predict_scores(users).items()
        }


class _LikesBaseline(BaseEstimator):
    """Shared fit/predict plumbing for single-characteristic baselines."""

    def fit(self, X, y):
        """X: iterable of (user, page) like edges; y: {user: 0/1} labels."""
        self.likes_ = check_likes(X)
        self.labels_ = check_labels(y)
        if not self.labels_:
            raise DataError("need at least one labeled user")
        self.classes_ = (0, 1)
        return self

    def _check_fitted(self):
        if not hasattr(self, "labels_"):
            raise NotFittedError("fit must run before predict")

    def predict_scores(self, users) -> dict:
        raise NotImplementedError

    def predict(self, users) -> dict:
        return {
            u: 1 if s >= 0.5 else 0 for u, s in self.predict_scores(users).items()
        }


class AverageBaseline(_LikesBaseline):
    """Training-mean score for every user; ignores the like graph."""

    def predict_scores(self, users) -> dict:
        self._check_fitted()
        return baseline_average(self.labels_, sorted(set(users)))


class UserPageUser(_LikesBaseline):
    """Two-hop label averaging through shared pages."""

    def predict_scores(self, users) -> dict:
        self._check_fitted()
        return baseline_upu(self.likes_, self.labels_, sorted(set(users)))


class SharedPagesKNN(_LikesBaseline):
    """k nearest neighbors by co-liked page count, label-fraction score."""

    def __init__(self, k=5):
        self.k = k

    def predict_scores(self, users) -> dict:
        self._check_fitted()
        return baseline_knn(self.likes_, self.labels_, sorted(set(users)), k=self.k)
