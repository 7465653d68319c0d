"""Synthetic population generator standing in for private social data.

Each user draws a continuous latent score per characteristic; the median
split over users yields exactly balanced binary gold labels (ties go to the
positive class, matching the >= 0.5 threshold convention). Each page draws
a trait-affinity vector, and users pick pages to like with probability
proportional to exp(scale * affinity * alignment), so trait_page_affinity=0
makes likes pure noise while larger values make co-liking informative.
Per-source classifier scores start from the true label, flip with the
source's noise probability, then land uniformly inside the half-interval of
the (possibly flipped) label. Everything is a pure function of the seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .profiles import CHARACTERISTICS, ProfileEvidence

# exp(scale * s) odds ratio between perfectly aligned and anti-aligned pages
# at trait_page_affinity = 1; chosen so mid-range affinities leave headroom
# for the like-count trends instead of saturating.
ALIGNMENT_SCALE = 3.0

DEFAULT_SOURCE_NOISE = {"txt": 0.35, "img": 0.35}


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 500
    n_pages: int = 2000
    likes_per_user: int = 40
    source_noise: dict = field(default_factory=lambda: dict(DEFAULT_SOURCE_NOISE))
    trait_page_affinity: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.n_pages < 1 or self.likes_per_user < 1:
            raise DataError("population sizes must be positive")
        if self.likes_per_user > self.n_pages:
            raise DataError("likes_per_user cannot exceed n_pages")
        for source, noise in self.source_noise.items():
            if not (0.0 <= noise <= 0.5):
                raise DataError(f"noise for {source} must lie in [0, 0.5]")
        if not (0.0 <= self.trait_page_affinity <= 1.0):
            raise DataError("trait_page_affinity must lie in [0, 1]")


def generate_synthetic(config: SynthConfig):
    """Returns (ProfileEvidence without known labels, gold label dict)."""
    rng = np.random.default_rng(config.seed)
    n_users, n_pages = config.n_users, config.n_pages
    n_traits = len(CHARACTERISTICS)
    users = [f"u{i:05d}" for i in range(n_users)]
    pages = [f"p{i:05d}" for i in range(n_pages)]

    latent = rng.standard_normal((n_users, n_traits))
    medians = np.median(latent, axis=0)
    labels = (latent >= medians).astype(np.int64)
    signs = 2.0 * labels - 1.0

    affinity = rng.standard_normal((n_pages, n_traits)) / math.sqrt(n_traits)
    logits = (
        config.trait_page_affinity * ALIGNMENT_SCALE * (signs @ affinity.T)
    )
    likes = {}
    for i, user in enumerate(users):
        weights = np.exp(logits[i] - logits[i].max())
        weights /= weights.sum()
        picked = rng.choice(n_pages, size=config.likes_per_user, replace=False, p=weights)
        for j in sorted(int(p) for p in picked):
            likes[(user, pages[j])] = 1.0

    predicts = {}
    for source in sorted(config.source_noise):
        noise = config.source_noise[source]
        flips = rng.random((n_users, n_traits)) < noise
        jitter = rng.random((n_users, n_traits))
        shown = np.where(flips, 1 - labels, labels)
        scores = np.where(shown == 1, 0.5 + 0.5 * jitter, 0.5 * jitter)
        for i, user in enumerate(users):
            for t, char in enumerate(CHARACTERISTICS):
                predicts[(user, char, source)] = float(scores[i, t])

    gold = {
        (user, char): int(labels[i, t])
        for i, user in enumerate(users)
        for t, char in enumerate(CHARACTERISTICS)
    }
    evidence = ProfileEvidence(predicts=predicts, likes=likes, known_traits={})
    return evidence, gold
