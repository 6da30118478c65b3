"""Bandit policies: conjugate Thompson sampling, Racing Thompson and SMC Thompson."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .distributions import (DomainError, Family, PosteriorState, PriorSpec, conjugate_update,
                            log_likelihood, reward_means, sample_proposal)
from .gumbel import sample_noise
from .racing import RacingConfig, RacingOutcome, race
from .smc import ParticleSet, init_particles, reweight, resample, sample_mean_vector


@dataclass(frozen=True)
class Decision:
    arm: int
    samples_used: Optional[int] = None
    outcome: Optional[RacingOutcome] = None


class Agent:
    """Shared bookkeeping: observation history and the warm-start phase.

    With ``warm_start`` on, the first K decisions pull arms 0..K-1 in order,
    each once, before the policy is consulted.
    """

    name = "agent"

    def __init__(self, families: Sequence, warm_start: bool = True):
        self.families = tuple(Family(f) for f in families)
        self.warm_start = warm_start
        self.history = [[] for _ in self.families]

    @property
    def n_arms(self) -> int:
        return len(self.families)

    @property
    def pulls(self) -> np.ndarray:
        return np.array([len(h) for h in self.history])

    def decide(self, rng: np.random.Generator) -> Decision:
        if self.warm_start:
            unpulled = np.flatnonzero(self.pulls == 0)
            if unpulled.size:
                return Decision(int(unpulled[0]))
        return self._policy(rng)

    def select_arm(self, rng: np.random.Generator) -> int:
        return self.decide(rng).arm

    def update(self, arm: int, reward: float) -> None:
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"arm index {arm} out of range for {self.n_arms} arms")
        self._observe(arm, float(reward))
        self.history[arm].append(float(reward))

    def _policy(self, rng) -> Decision:
        raise NotImplementedError

    def _observe(self, arm: int, reward: float) -> None:
        pass


class UniformRandom(Agent):
    name = "random"

    def _policy(self, rng):
        return Decision(int(rng.integers(self.n_arms)))


class VanillaTS(Agent):
    """Thompson sampling with the closed-form posterior of each arm.

    Bernoulli arms take a ``Beta(prior_a, prior_b)`` prior; the other families
    use their Jeffreys-type easy prior.
    """

    name = "vanilla"

    def __init__(self, families, prior_a=1.0, prior_b=1.0, warm_start: bool = True):
        super().__init__(families, warm_start)
        self.state = PosteriorState.empty(self.families, prior_a, prior_b)

    def _policy(self, rng):
        draw = sample_proposal(self.state, rng)
        return Decision(int(np.argmax(reward_means(draw, self.families))))

    def _observe(self, arm, reward):
        self.state = conjugate_update(self.state, arm, reward)


def beta_ratio_log_bound(prior_a, prior_b, base_a, base_b) -> float:
    """log sup over [0,1]^K of prod_j Beta(x_j|prior) / Beta(x_j|base).

    Finite only when the prior pseudo-counts dominate the base ones.
    """
    pa, pb, ba, bb = (np.asarray(v, dtype=float) for v in (prior_a, prior_b, base_a, base_b))
    d1, d2 = pa - ba, pb - bb
    if np.any(d1 < 0) or np.any(d2 < 0):
        return math.inf
    x = np.where(d1 + d2 > 0, d1 / np.where(d1 + d2 > 0, d1 + d2, 1.0), 0.5)
    val = special.xlogy(d1, x) + special.xlog1py(d2, -x) + special.betaln(ba, bb) - special.betaln(pa, pb)
    return float(val.sum())


class RacingTS(Agent):
    """Thompson sampling through a Gumbel-perturbed best-arm race.

    The proposal is the closed-form posterior of an easy per-arm prior. With
    ``proposal="uniform"`` that easy prior is Beta(1, 1) for Bernoulli arms
    (Gamma(1, 1), flat and Jeffreys for the others). With
    ``proposal="matched"`` and an independent Beta prior, the Beta prior
    itself is used, so the importance ratio is constant.
    """

    name = "racing"

    def __init__(self, prior: PriorSpec, families, config: Optional[RacingConfig] = None,
                 proposal: str = "uniform", warm_start: bool = True):
        super().__init__(families, warm_start)
        if prior.dimension != self.n_arms:
            raise DomainError("prior dimension does not match the number of arms")
        self.prior = prior
        self.config = config or RacingConfig()
        if proposal == "uniform":
            self.state = PosteriorState.empty(self.families)
            self.log_ratio_bound = prior.log_upper_bound
        elif proposal == "matched":
            if prior.name != "beta" or any(f is not Family.BERNOULLI for f in self.families):
                raise DomainError("a matched proposal needs Bernoulli arms and an independent Beta prior")
            a, b = prior.metadata["a"], prior.metadata["b"]
            self.state = PosteriorState.empty(self.families, a, b)
            self.log_ratio_bound = beta_ratio_log_bound(a, b, a, b)
        else:
            raise ValueError(f"unknown proposal {proposal!r}")
        self.proposal = proposal

    def _policy(self, rng):
        noise = sample_noise(self.n_arms, rng)
        out = race(noise, self.prior, self.state, self.config, rng, log_ratio_bound=self.log_ratio_bound)
        return Decision(out.chosen_arm, out.samples_used, out)

    def _observe(self, arm, reward):
        self.state = conjugate_update(self.state, arm, reward)


class SMCTS(Agent):
    """Thompson sampling on a weighted particle approximation of the posterior.

    Either a fixed number of particles (``n_particles``) or a per-step
    ``schedule`` of particle counts. Particles are i.i.d. prior draws whose
    weights depend only on their own position, so a run with N particles is
    the first N particles of a larger pool; the pool grows on demand, new
    particles being weighted by the full history. ``schedule[t]`` is the count
    used at decision ``t`` (0-based over all decisions); ``None`` entries and
    steps past the end reuse the most recent count.
    """

    name = "smc"

    def __init__(self, prior: PriorSpec, families, n_particles: Optional[int] = None,
                 schedule: Optional[Sequence[Optional[int]]] = None, resample: bool = False,
                 rng: Optional[np.random.Generator] = None, warm_start: bool = True):
        super().__init__(families, warm_start)
        if (n_particles is None) == (schedule is None):
            raise ValueError("give exactly one of n_particles and schedule")
        if resample and schedule is not None:
            raise ValueError("resampling is only supported with a fixed particle count")
        self.prior = prior
        self.schedule = None if schedule is None else list(schedule)
        self.fixed_n = n_particles
        self.resample = resample
        self._rng = rng if rng is not None else np.random.default_rng()
        self._t = 0
        self._n_now = int(n_particles) if n_particles is not None else 1
        self._counts = [Counter() for _ in self.families]
        self._n_now = self._count_at(0)
        self.particles = init_particles(prior, self._n_now, self._rng)

    def _count_at(self, t: int) -> int:
        if self.schedule is None:
            return int(self.fixed_n)
        if t < len(self.schedule) and self.schedule[t] is not None:
            return max(1, int(self.schedule[t]))
        return self._n_now

    def _grow(self, n: int) -> None:
        extra = n - len(self.particles)
        if extra <= 0:
            return
        fresh = init_particles(self.prior, extra, self._rng)
        lw = fresh.log_weights.copy()
        for j, counts in enumerate(self._counts):
            for x, c in counts.items():
                lw += c * log_likelihood(self.families[j], x, fresh.particles[:, j])
        self.particles = ParticleSet(np.vstack([self.particles.particles, fresh.particles]),
                                     np.concatenate([self.particles.log_weights, lw]))

    def _policy(self, rng):
        active = self.particles.head(self._n_now)
        draw = sample_mean_vector(active, rng)
        return Decision(int(np.argmax(reward_means(draw, self.families))), self._n_now)

    def _observe(self, arm, reward):
        self.particles = reweight(self.particles, arm, reward, self.families[arm])
        if self.resample:
            self.particles = resample(self.particles, self._rng)
        self._counts[arm][reward] += 1
        self._t += 1
        self._n_now = self._count_at(self._t)
        self._grow(self._n_now)
