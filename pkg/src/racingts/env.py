"""Stochastic bandit environments and pseudo-regret."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DomainError, Family, PriorSpec, RewardFamily, reward_means


@dataclass(frozen=True)
class BanditInstance:
    """Arm parameters (success probability, rate or mean) plus the reward family."""

    params: np.ndarray
    family: Family = Family.BERNOULLI

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.params, dtype=float)).copy()
        p.setflags(write=False)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "family", Family(self.family))
        for v in p:
            RewardFamily(self.family, v)  # range check

    @property
    def n_arms(self) -> int:
        return self.params.size

    @property
    def means(self) -> np.ndarray:
        return reward_means(self.params, self.family)

    @property
    def best_mean(self) -> float:
        return float(self.means.max())


def _valid(params: np.ndarray, family: Family) -> bool:
    if not np.all(np.isfinite(params)):
        return False
    if family is Family.BERNOULLI:
        return bool(np.all((params >= 0) & (params <= 1)))
    if family in (Family.EXPONENTIAL, Family.POISSON):
        return bool(np.all(params > 0))
    return True


def draw_instance(prior: PriorSpec, family, rng: np.random.Generator, max_tries: int = 10_000) -> BanditInstance:
    """Sample arm parameters from ``prior``; invalid draws are redrawn."""
    family = Family(family)
    for _ in range(max_tries):
        params = prior.sample(rng)
        if _valid(params, family):
            return BanditInstance(params, family)
    raise DomainError("prior keeps producing parameters outside the family's range")


def pull(instance: BanditInstance, arm: int, rng: np.random.Generator) -> float:
    if not 0 <= arm < instance.n_arms:
        raise DomainError(f"arm index {arm} out of range for {instance.n_arms} arms")
    p = float(instance.params[arm])
    fam = instance.family
    if fam is Family.BERNOULLI:
        return float(rng.random() < p)
    if fam is Family.EXPONENTIAL:
        return float(rng.exponential(1.0 / p))
    if fam is Family.GAUSSIAN:
        return float(rng.normal(p, 1.0))
    return float(rng.poisson(p))


@dataclass
class RegretTrace:
    instance: BanditInstance
    arms: np.ndarray

    def __post_init__(self):
        self.arms = np.asarray(self.arms, dtype=np.int64).reshape(-1)
        if self.arms.size and (self.arms.min() < 0 or self.arms.max() >= self.instance.n_arms):
            raise DomainError("trace contains an invalid arm index")

    @property
    def horizon(self) -> int:
        return self.arms.size

    def per_step(self) -> np.ndarray:
        return self.instance.best_mean - self.instance.means[self.arms]

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.per_step())

    def __add__(self, other: "RegretTrace") -> "RegretTrace":
        if other.instance is not self.instance:
            raise DomainError("cannot concatenate traces of different instances")
        return RegretTrace(self.instance, np.concatenate([self.arms, other.arms]))


def regret(trace: RegretTrace) -> float:
    """T * max_i mu_i - sum_t mu_{I_t}."""
    return float(trace.per_step().sum())
