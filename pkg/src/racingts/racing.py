"""Racing best-arm identification over Gumbel-perturbed importance weights.

For frozen Gumbel noise ``eps`` and a proposal ``B`` built from tractable
per-arm posteriors, arm ``i`` is scored by

    E_{mu ~ B}[ exp(eps_i) * pi(mu) * 1[i = argmax_j mean_j(mu)] / q(mu) ]

where ``pi`` is the (possibly unnormalized) prior and ``q`` the easy prior the
proposal was built from. The arm with the largest score is an exact Thompson
sample. :func:`race` estimates all K scores from one shared stream of proposal
draws and stops as soon as the leader is separated from the runner-up.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (DomainError, PosteriorState, PriorSpec, proposal_log_density,
                            reward_means, sample_proposal)

DEFAULT_ABSOLUTE_CAP = 1_000_000
_MAX_CHUNK = 1 << 16


class StopReason(str, enum.Enum):
    THRESHOLD = "threshold"
    M_MAX = "m_max"
    ABSOLUTE_CAP = "absolute_cap"


@dataclass(frozen=True)
class RacingConfig:
    delta: float = 0.1
    sigma: float = 0.1
    batch_size: int = 1
    absolute_cap: int = DEFAULT_ABSOLUTE_CAP

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        if int(self.absolute_cap) < 1:
            raise ValueError("absolute_cap must be >= 1")

    @property
    def sample_limit(self) -> int:
        return min(m_max(self.delta, self.sigma, limit=self.absolute_cap), int(self.absolute_cap))


@dataclass(frozen=True)
class RacingOutcome:
    """Result of one race.

    ``estimates`` are the running means after division by ``exp(log_scale)``;
    multiply back to recover the raw importance-weighted scores.
    """

    chosen_arm: int
    samples_used: int
    estimates: np.ndarray
    stopped_by: StopReason
    log_scale: float = 0.0

    @property
    def degenerate(self) -> bool:
        return not np.any(self.estimates > 0)


def threshold_beta(m, delta: float):
    """Deviation threshold for 1-subgaussian running means after ``m`` samples.

    A negative bracket (possible for large ``delta``) is clamped to zero.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 1):
        raise ValueError("m must be >= 1")
    inv = math.log(1.0 / delta)
    bracket = inv + 3.0 * math.log(inv) + 1.5 * np.log(np.log(math.e * m_arr / 2.0))
    out = np.sqrt(np.maximum(bracket, 0.0) / (2.0 * m_arr))
    return float(out) if np.ndim(out) == 0 else out


@functools.lru_cache(maxsize=1024)
def m_max(delta: float, sigma: float, limit: int = 10**9) -> int:
    """Smallest ``m`` with ``2 * threshold_beta(m, delta) <= sigma``.

    Returns ``limit + 1`` if no such ``m <= limit`` exists; callers clamp.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    start, block = 1, 1024
    while start <= limit:
        stop = min(start + block, limit + 1)
        ms = np.arange(start, stop, dtype=float)
        hit = np.nonzero(2.0 * threshold_beta(ms, delta) <= sigma)[0]
        if hit.size:
            return int(start + hit[0])
        start, block = stop, min(block * 2, 1 << 22)
    return int(limit) + 1


def _winners(state: PosteriorState, mu: np.ndarray) -> np.ndarray:
    return np.argmax(reward_means(mu, state.families), axis=-1)


def _log_weights(prior: PriorSpec, state: PosteriorState, mu: np.ndarray) -> np.ndarray:
    """log pi(mu) - log q(mu), with -inf wherever the prior vanishes."""
    lp = np.asarray(prior.log_density(mu), dtype=float)
    lq = proposal_log_density(state, mu)
    with np.errstate(invalid="ignore"):
        out = lp - lq
    return np.where(np.isfinite(lp) & np.isfinite(lq), out, -np.inf)


def f_eval(noise, prior: PriorSpec, proposal_state: PosteriorState, mu) -> np.ndarray:
    """Unscaled per-arm integrands for a single shared draw ``mu``."""
    eps = np.asarray(noise, dtype=float)
    mu = np.asarray(mu, dtype=float)
    out = np.zeros(eps.size)
    i = int(_winners(proposal_state, mu))
    lw = float(_log_weights(prior, proposal_state, mu))
    if lw > -np.inf:
        out[i] = math.exp(eps[i] + lw)
    return out


def race(noise, prior: PriorSpec, proposal_state: PosteriorState, config: RacingConfig,
         rng: np.random.Generator, log_ratio_bound: float | None = None) -> RacingOutcome:
    """Race the K perturbed scores until one arm is separated.

    Scores are divided by ``exp(log_ratio_bound + max eps)``, where
    ``log_ratio_bound`` bounds the log prior-to-base ratio (by default the
    prior's log density bound). That maps every integrand into [0, 1]
    without changing the ordering. The stopping rule is checked after every ``batch_size`` draws;
    draws are generated in larger chunks, which does not change the result.
    """
    eps = np.asarray(noise, dtype=float)
    k = eps.size
    if k != proposal_state.n_arms or k != prior.dimension:
        raise DomainError("noise, prior and proposal disagree on the number of arms")
    if not math.isfinite(prior.density_upper_bound):
        raise DomainError("prior density bound must be finite")
    if log_ratio_bound is None:
        log_ratio_bound = prior.log_upper_bound
    log_scale = log_ratio_bound + float(eps.max())
    mm = m_max(config.delta, config.sigma, limit=config.absolute_cap)
    cap = min(mm, int(config.absolute_cap))
    batch = int(config.batch_size)
    shift = eps - log_scale

    sums = np.zeros(k)
    m = 0
    chunk = 32
    reason = None
    while m < cap:
        n = min(chunk, cap - m)
        mu = sample_proposal(proposal_state, rng, n)
        win = _winners(proposal_state, mu)
        vals = np.exp(shift[win] + _log_weights(prior, proposal_state, mu))
        contrib = np.zeros((n, k))
        contrib[np.arange(n), win] = vals
        cums = sums + np.cumsum(contrib, axis=0)
        ms = np.arange(m + 1, m + n + 1)
        if k == 1:
            gap = np.full(n, np.inf)
        else:
            top = np.partition(cums, k - 2, axis=1)[:, -2:]
            gap = (top[:, 1] - top[:, 0]) / ms
        check = (ms % batch == 0) | (ms == cap)
        ok = check & (gap > 2.0 * threshold_beta(ms, config.delta) - config.sigma)
        hit = np.flatnonzero(ok)
        if hit.size:
            i = hit[0]
            sums, m, reason = cums[i], int(ms[i]), StopReason.THRESHOLD
            break
        sums, m = cums[-1], int(ms[-1])
        chunk = min(chunk * 2, _MAX_CHUNK)
    if reason is None:
        reason = StopReason.M_MAX if mm <= config.absolute_cap else StopReason.ABSOLUTE_CAP
    estimates = sums / m
    return RacingOutcome(int(np.argmax(estimates)), m, estimates, reason, log_scale)
