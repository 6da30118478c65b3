"""Weighted-particle posterior approximation (sequential importance sampling).

Particles are drawn once from the prior and never move; each observation
multiplies every weight by its likelihood. Weights are kept as logs so long
horizons do not underflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DomainError, PriorSpec, RewardFamily, log_likelihood


@dataclass(frozen=True)
class ParticleSet:
    particles: np.ndarray
    log_weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if p.shape[0] < 1 or p.shape[0] != lw.size:
            raise DomainError("need at least one particle and one log-weight per particle")
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def from_weights(cls, particles, weights) -> "ParticleSet":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(particles, np.log(w))

    def __len__(self) -> int:
        return self.particles.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Raw weights ``exp(log_weights)``; may underflow for long runs."""
        return np.exp(self.log_weights)

    def normalized_weights(self) -> np.ndarray:
        top = self.log_weights.max()
        if top == -np.inf:
            raise DomainError("all particle weights are zero")
        w = np.exp(self.log_weights - top)
        return w / w.sum()

    def head(self, n: int) -> "ParticleSet":
        return ParticleSet(self.particles[:n], self.log_weights[:n])


def init_particles(prior: PriorSpec, n: int, rng: np.random.Generator) -> ParticleSet:
    """``n`` i.i.d. prior draws with unit weights."""
    if int(n) < 1:
        raise DomainError("need at least one particle")
    return ParticleSet(prior.sample(rng, int(n)), np.zeros(int(n)))


def reweight(particles: ParticleSet, arm: int, x: float, family) -> ParticleSet:
    """Multiply each weight by the likelihood of ``x`` at the particle's ``arm`` coordinate.

    ``family`` is a :class:`RewardFamily` or a family kind.
    """
    if not 0 <= arm < particles.particles.shape[1]:
        raise DomainError(f"arm index {arm} out of range")
    kind = family.kind if isinstance(family, RewardFamily) else family
    lw = particles.log_weights + log_likelihood(kind, x, particles.particles[:, arm])
    if np.all(lw == -np.inf):
        raise DomainError("observation has zero likelihood under every particle")
    return ParticleSet(particles.particles, lw)


def sample_mean_vector(particles: ParticleSet, rng: np.random.Generator) -> np.ndarray:
    """One particle, chosen with probability proportional to its weight."""
    w = particles.normalized_weights()
    i = int(rng.choice(len(particles), p=w)) if len(particles) > 1 else 0
    return particles.particles[i].copy()


def effective_sample_size(particles: ParticleSet) -> float:
    w = particles.normalized_weights()
    return float(1.0 / np.sum(w * w))


def resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Multinomial resampling back to equal weights."""
    w = particles.normalized_weights()
    idx = rng.choice(len(particles), size=len(particles), p=w)
    return ParticleSet(particles.particles[idx], np.zeros(len(particles)))
