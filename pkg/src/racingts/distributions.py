"""Reward families, prior specifications and the tractable per-arm proposals.

Every arm carries one of four reward families. For each family there is an
"easy" prior whose posterior is available in closed form:

==============  ==================  ==============  ======================
family          likelihood          easy prior      posterior after T obs
==============  ==================  ==============  ======================
Bernoulli       p^x (1-p)^(1-x)     Beta(1, 1)      Beta(1+s, 1+T-s)
Exponential     lam exp(-lam x)     Gamma(1, 1)     Gamma(1+T, 1+s)
Gaussian        N(x; mu, 1)         flat            N(s/T, 1/T)
Poisson         lam^x e^-lam / x!   lam^(-1/2)      Gamma(1/2+s, T)
==============  ==================  ==============  ======================

Gamma distributions use the shape/rate parameterization throughout. The
coordinate of an arm is the family's natural parameter (success probability,
rate, mean, rate); :func:`reward_means` maps it to the expected reward, which
is what decides the best arm.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

ArrayLike = Union[float, Sequence[float], np.ndarray]


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class WarmStartError(DomainError):
    """An improper-prior arm was sampled before it had any observation."""


class Family(str, enum.Enum):
    BERNOULLI = "bernoulli"
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"

    @property
    def improper(self) -> bool:
        return self in (Family.GAUSSIAN, Family.POISSON)


def _as_family(kind: Union[str, Family]) -> Family:
    try:
        return Family(kind)
    except ValueError:
        raise DomainError(f"unknown reward family {kind!r}") from None


@dataclass(frozen=True)
class RewardFamily:
    """A reward distribution: family kind plus its parameter."""

    kind: Family
    parameter: float

    def __post_init__(self):
        object.__setattr__(self, "kind", _as_family(self.kind))
        p = float(self.parameter)
        if self.kind is Family.BERNOULLI and not 0.0 <= p <= 1.0:
            raise DomainError(f"Bernoulli parameter must lie in [0, 1], got {p}")
        if self.kind in (Family.EXPONENTIAL, Family.POISSON) and not p > 0.0:
            raise DomainError(f"{self.kind.value} rate must be positive, got {p}")
        if not math.isfinite(p):
            raise DomainError("parameter must be finite")
        object.__setattr__(self, "parameter", p)

    @property
    def mean(self) -> float:
        return float(reward_means(self.parameter, self.kind))


def reward_means(params: ArrayLike, kind: Union[Family, Sequence[Family]]) -> np.ndarray:
    """Expected reward for natural parameters ``params`` (last axis = arms)."""
    params = np.asarray(params, dtype=float)
    if isinstance(kind, (Family, str)):
        return 1.0 / params if _as_family(kind) is Family.EXPONENTIAL else params
    kinds = [_as_family(k) for k in kind]
    if Family.EXPONENTIAL not in kinds:
        return params
    inv = np.array([k is Family.EXPONENTIAL for k in kinds])
    with np.errstate(divide="ignore"):
        return np.where(inv, 1.0 / params, params)


def _check_observation(kind: Family, x: float) -> None:
    if kind is Family.BERNOULLI and x not in (0, 1):
        raise DomainError(f"Bernoulli observation must be 0 or 1, got {x}")
    if kind is Family.EXPONENTIAL and not x >= 0:
        raise DomainError(f"exponential observation must be nonnegative, got {x}")
    if kind is Family.POISSON and not (x >= 0 and float(x).is_integer()):
        raise DomainError(f"Poisson observation must be a nonnegative integer, got {x}")
    if not math.isfinite(x):
        raise DomainError("observation must be finite")


def log_likelihood(kind: Union[Family, str], x: float, params: ArrayLike) -> np.ndarray:
    """Vectorized log P(x | theta) over an array of parameters ``params``.

    Parameters outside the family's range get ``-inf``.
    """
    kind = _as_family(kind)
    x = float(x)
    _check_observation(kind, x)
    theta = np.asarray(params, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is Family.BERNOULLI:
            out = np.log(theta) if x == 1 else np.log1p(-theta)
            out = np.where((theta >= 0) & (theta <= 1), out, -np.inf)
        elif kind is Family.EXPONENTIAL:
            out = np.where(theta > 0, np.log(theta) - theta * x, -np.inf)
        elif kind is Family.GAUSSIAN:
            out = -0.5 * (x - theta) ** 2 - 0.5 * math.log(2 * math.pi)
        else:
            out = np.where(theta > 0, x * np.log(theta) - theta - math.lgamma(x + 1), -np.inf)
            if x == 0:
                out = np.where(theta > 0, -theta, -np.inf)
    return out


def likelihood(family: RewardFamily, x: float) -> float:
    """Density (or mass) of observation ``x`` under ``family``."""
    return float(np.exp(log_likelihood(family.kind, x, family.parameter)))


# ---------------------------------------------------------------------------
# Proposal state


@dataclass
class PosteriorState:
    """Per-arm sufficient statistics of the tractable proposal.

    ``counts[j]`` is the number of observations of arm ``j`` and ``sums[j]``
    their total. For Bernoulli arms the easy prior may be widened to a general
    ``Beta(prior_a, prior_b)``; the default (1, 1) is the uniform prior used to
    build racing proposals, other values give the conjugate posterior that
    vanilla Thompson sampling needs.
    """

    families: tuple
    counts: np.ndarray
    sums: np.ndarray
    prior_a: np.ndarray
    prior_b: np.ndarray

    @classmethod
    def empty(cls, families, prior_a: ArrayLike = 1.0, prior_b: ArrayLike = 1.0) -> "PosteriorState":
        if isinstance(families, (str, Family)):
            raise TypeError("families must be a sequence with one entry per arm")
        fams = tuple(_as_family(f) for f in families)
        k = len(fams)
        if k == 0:
            raise DomainError("need at least one arm")
        a = np.broadcast_to(np.asarray(prior_a, dtype=float), (k,)).copy()
        b = np.broadcast_to(np.asarray(prior_b, dtype=float), (k,)).copy()
        if np.any(a <= 0) or np.any(b <= 0):
            raise DomainError("Beta pseudo-counts must be positive")
        return cls(fams, np.zeros(k, dtype=np.int64), np.zeros(k), a, b)

    @property
    def n_arms(self) -> int:
        return len(self.families)

    @property
    def ones(self) -> np.ndarray:
        return self.sums.copy()

    @property
    def zeros(self) -> np.ndarray:
        return self.counts - self.sums

    def copy(self) -> "PosteriorState":
        return PosteriorState(self.families, self.counts.copy(), self.sums.copy(),
                              self.prior_a.copy(), self.prior_b.copy())

    def posterior_params(self, arm: int) -> tuple:
        """Parameters of arm ``arm``'s proposal, e.g. ``("beta", a, b)``."""
        kind = self.families[arm]
        n, s = int(self.counts[arm]), float(self.sums[arm])
        if kind is Family.BERNOULLI:
            return ("beta", self.prior_a[arm] + s, self.prior_b[arm] + n - s)
        if kind is Family.EXPONENTIAL:
            return ("gamma", 1.0 + n, 1.0 + s)
        if n == 0:
            raise WarmStartError(f"arm {arm} ({kind.value}) has an improper prior and no observations")
        if kind is Family.GAUSSIAN:
            return ("normal", s / n, 1.0 / n)
        return ("gamma", 0.5 + s, float(n))


def conjugate_update(state: PosteriorState, arm: int, x: float) -> PosteriorState:
    """Return a new state with observation ``x`` of ``arm`` folded in."""
    if not 0 <= arm < state.n_arms:
        raise DomainError(f"arm index {arm} out of range for {state.n_arms} arms")
    _check_observation(state.families[arm], float(x))
    new = state.copy()
    new.counts[arm] += 1
    new.sums[arm] += x
    return new


def sample_proposal(state: PosteriorState, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw arm parameters independently from each arm's proposal.

    Returns shape ``(K,)`` when ``size`` is None, else ``(size, K)``.
    """
    n = 1 if size is None else int(size)
    fams = state.families
    k = len(fams)
    if all(f is Family.BERNOULLI for f in fams):
        a = state.prior_a + state.sums
        b = state.prior_b + state.counts - state.sums
        out = rng.beta(a, b, size=(n, k))
    else:
        out = np.empty((n, k))
        for j in range(k):
            dist, p1, p2 = state.posterior_params(j)
            if dist == "beta":
                out[:, j] = rng.beta(p1, p2, size=n)
            elif dist == "gamma":
                out[:, j] = rng.gamma(p1, 1.0 / p2, size=n)
            else:
                out[:, j] = rng.normal(p1, math.sqrt(p2), size=n)
    return out[0] if size is None else out


def proposal_log_density(state: PosteriorState, mu: ArrayLike) -> np.ndarray:
    """Sum over arms of the easy prior's log density at ``mu``.

    This is the denominator of the importance ratio: Beta(a, b) for Bernoulli
    arms (identically zero for the uniform case), Gamma(1, 1) for Exponential,
    and the unnormalized flat / ``lam^(-1/2)`` priors for Gaussian / Poisson.
    Values outside an arm's support give ``-inf``.
    """
    mu = np.asarray(mu, dtype=float)
    if all(f is Family.BERNOULLI for f in state.families) and np.all(state.prior_a == 1) \
            and np.all(state.prior_b == 1):
        return np.where(np.all((mu >= 0) & (mu <= 1), axis=-1), 0.0, -np.inf)
    total = np.zeros(mu.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        for j, kind in enumerate(state.families):
            x = mu[..., j]
            if kind is Family.BERNOULLI:
                a, b = state.prior_a[j], state.prior_b[j]
                inside = (x >= 0) & (x <= 1)
                if a == 1.0 and b == 1.0:
                    lp = np.zeros_like(x)
                else:
                    lp = special.xlog1py(b - 1, -x) + special.xlogy(a - 1, x) - special.betaln(a, b)
            elif kind is Family.EXPONENTIAL:
                inside = x > 0
                lp = -x
            elif kind is Family.GAUSSIAN:
                inside = np.isfinite(x)
                lp = np.zeros_like(x)
            else:
                inside = x > 0
                lp = -0.5 * np.log(x)
            total = total + np.where(inside, lp, -np.inf)
    return total


# ---------------------------------------------------------------------------
# Priors over the K-vector of arm parameters


@dataclass(frozen=True)
class PriorSpec:
    """A K-dimensional prior, possibly unnormalized.

    ``log_density`` maps an array of shape ``(..., K)`` to shape ``(...)``.
    ``sampler(rng, n)`` returns ``n`` draws of shape ``(n, K)``.
    ``density_upper_bound`` bounds ``exp(log_density)`` on the support.
    """

    dimension: int
    log_density: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    support: tuple
    density_upper_bound: float
    name: str = "prior"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("prior dimension must be positive")
        if not self.density_upper_bound > 0:
            raise DomainError("density upper bound must be positive")
        lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), (self.dimension,)).copy()
                  for v in self.support)
        object.__setattr__(self, "support", (lo, hi))

    @property
    def log_upper_bound(self) -> float:
        return math.log(self.density_upper_bound)

    def sample(self, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
        out = self.sampler(rng, 1 if n is None else int(n))
        return out[0] if n is None else out

    def in_support(self, mu: np.ndarray) -> np.ndarray:
        lo, hi = self.support
        return np.all((mu >= lo) & (mu <= hi), axis=-1)


def make_uniform_prior(k: int, low: float = 0.0, high: float = 1.0) -> PriorSpec:
    """Unnormalized flat prior on the box ``[low, high]^k``."""
    if not high > low:
        raise DomainError("empty box")

    def log_density(mu):
        mu = np.asarray(mu, dtype=float)
        inside = np.all((mu >= low) & (mu <= high), axis=-1)
        return np.where(inside, 0.0, -np.inf)

    def sampler(rng, n):
        return rng.uniform(low, high, size=(n, k))

    return PriorSpec(k, log_density, sampler, (low, high), 1.0, name="uniform")


def _beta_log_mode_density(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    mode = np.where(a + b > 2, (a - 1) / np.maximum(a + b - 2, 1e-300), 0.5)
    return special.xlogy(a - 1, mode) + special.xlog1py(b - 1, -mode) - special.betaln(a, b)


def make_beta_prior(a: ArrayLike, b: ArrayLike) -> PriorSpec:
    """Independent Beta(a_j, b_j) prior per arm (normalized).

    The density is bounded only when every ``a_j, b_j >= 1``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    if np.any(a < 1) or np.any(b < 1):
        raise DomainError("Beta prior needs a, b >= 1 for a finite density bound")
    k = a.size
    log_norm = special.betaln(a, b)

    def log_density(mu):
        mu = np.asarray(mu, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = special.xlogy(a - 1, mu) + special.xlog1py(b - 1, -mu) - log_norm
        inside = np.all((mu >= 0) & (mu <= 1), axis=-1)
        return np.where(inside, lp.sum(axis=-1), -np.inf)

    def sampler(rng, n):
        return rng.beta(a, b, size=(n, k))

    bound = float(np.exp(_beta_log_mode_density(a, b).sum()))
    return PriorSpec(k, log_density, sampler, (0.0, 1.0), bound, name="beta",
                     metadata={"a": a.tolist(), "b": b.tolist()})


def make_point_mass_prior(values: ArrayLike) -> PriorSpec:
    """Degenerate prior putting all mass on ``values``."""
    point = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    k = point.size

    def log_density(mu):
        mu = np.asarray(mu, dtype=float)
        return np.where(np.all(mu == point, axis=-1), 0.0, -np.inf)

    def sampler(rng, n):
        return np.tile(point, (n, 1))

    return PriorSpec(k, log_density, sampler, (point, point), 1.0, name="point_mass")


class TruncationError(DomainError):
    """The truncation box captures (numerically) no Gaussian mass."""


def make_truncated_gaussian_prior(
    means: ArrayLike,
    covariance: ArrayLike,
    box: tuple = (0.0, 1.0),
    rng: Optional[np.random.Generator] = None,
    probe_draws: int = 1_000_000,
    min_acceptance: float = 1e-6,
) -> PriorSpec:
    """Multivariate Gaussian restricted to a box, sampled by rejection.

    The log density is the unnormalized Gaussian exponent inside the box and
    ``-inf`` outside. The density bound is found by maximizing that exponent
    over the box (a convex quadratic program).

    Raises:
        DomainError: if the covariance is not symmetric positive definite.
        TruncationError: if a probe of ``probe_draws`` joint draws accepts
            fewer than a ``min_acceptance`` fraction.
    """
    mean = np.atleast_1d(np.asarray(means, dtype=float)).copy()
    k = mean.size
    cov = np.atleast_2d(np.asarray(covariance, dtype=float)).copy()
    if cov.shape != (k, k):
        raise DomainError(f"covariance shape {cov.shape} does not match {k} means")
    if not np.allclose(cov, cov.T):
        raise DomainError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DomainError("covariance is not positive definite") from None
    lo, hi = float(box[0]), float(box[1])
    if not hi > lo:
        raise DomainError("empty truncation box")
    precision = np.linalg.inv(cov)
    precision = 0.5 * (precision + precision.T)
    diagonal = np.count_nonzero(cov - np.diag(np.diag(cov))) == 0
    sd = np.sqrt(np.diag(cov))

    def log_density(mu):
        mu = np.asarray(mu, dtype=float)
        d = mu - mean
        q = ((d @ precision) * d).sum(axis=-1)
        inside = np.all((mu >= lo) & (mu <= hi), axis=-1)
        return np.where(inside, -0.5 * q, -np.inf)

    def _joint(rng, n):
        z = rng.standard_normal((n, k))
        return mean + z @ chol.T

    def sampler(rng, n):
        if diagonal:
            # independent coordinates: reject each coordinate on its own
            out = np.empty((n, k))
            for j in range(k):
                out[:, j] = _reject_1d(rng, mean[j], sd[j], lo, hi, n)
            return out
        chunks, have = [], 0
        batch = max(64, int(n / max(acceptance, 1e-6) * 1.2))
        batch = min(batch, 2_000_000)
        while have < n:
            draws = _joint(rng, batch)
            keep = draws[np.all((draws >= lo) & (draws <= hi), axis=1)]
            chunks.append(keep)
            have += len(keep)
        return np.concatenate(chunks)[:n]

    probe_rng = rng if rng is not None else np.random.default_rng(0)
    if diagonal:
        per_coord = [_coordinate_mass(probe_rng, mean[j], sd[j], lo, hi, probe_draws) for j in range(k)]
        acceptance = float(np.prod(per_coord))
        degenerate = min(per_coord) < min_acceptance
    else:
        accepted, done = 0, 0
        while done < probe_draws:
            n = min(250_000, probe_draws - done)
            draws = _joint(probe_rng, n)
            accepted += int(np.count_nonzero(np.all((draws >= lo) & (draws <= hi), axis=1)))
            done += n
        acceptance = accepted / probe_draws
        degenerate = acceptance < min_acceptance
    if degenerate:
        raise TruncationError(f"rejection acceptance {acceptance:.3g} below {min_acceptance:g}")

    log_bound = _box_qp_max(mean, precision, lo, hi)
    return PriorSpec(k, log_density, sampler, (lo, hi), float(np.exp(log_bound)),
                     name="truncated_gaussian",
                     metadata={"means": mean.tolist(), "covariance": cov.tolist(),
                               "box": [lo, hi], "acceptance": acceptance})


def _coordinate_mass(rng, m, s, lo, hi, n):
    z = m + s * rng.standard_normal(n)
    return np.count_nonzero((z >= lo) & (z <= hi)) / n


def _reject_1d(rng, m, s, lo, hi, n):
    out = np.empty(n)
    have = 0
    while have < n:
        z = m + s * rng.standard_normal(max(2 * (n - have), 64))
        z = z[(z >= lo) & (z <= hi)][: n - have]
        out[have:have + len(z)] = z
        have += len(z)
    return out


def _box_qp_max(mean, precision, lo, hi) -> float:
    """Max over the box of -(x-m)' P (x-m) / 2."""
    start = np.clip(mean, lo, hi)
    if np.array_equal(start, mean):
        return 0.0

    def obj(x):
        d = x - mean
        return 0.5 * d @ precision @ d, precision @ d

    res = optimize.minimize(obj, start, jac=True, method="L-BFGS-B",
                            bounds=[(lo, hi)] * mean.size,
                            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000})
    best = min(float(res.fun), obj(start)[0])
    return -best
