"""Gumbel(0, 1) noise and Gumbel-Max categorical selection."""
from __future__ import annotations

import numpy as np

from .distributions import DomainError


def gumbel_from_uniform(u):
    """Map uniforms in the open interval (0, 1) to Gumbel(0, 1) variates."""
    return -np.log(-np.log(u))


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size)
    bad = (u <= 0.0) | (u >= 1.0)
    while np.any(bad):
        u[bad] = rng.random(np.count_nonzero(bad))
        bad = (u <= 0.0) | (u >= 1.0)
    return u


def sample_gumbel(rng: np.random.Generator, size=None):
    """Gumbel(0, 1) draw(s); boundary uniforms are redrawn, never clamped."""
    if size is None:
        return float(gumbel_from_uniform(_open_uniform(rng, 1))[0])
    return gumbel_from_uniform(_open_uniform(rng, size))


def sample_noise(k: int, rng: np.random.Generator) -> np.ndarray:
    """One frozen vector of K i.i.d. Gumbel perturbations."""
    return sample_gumbel(rng, int(k))


def argmax_lowest(values) -> int:
    """Index of the maximum, lowest index on ties (numpy's convention)."""
    return int(np.argmax(values))


def gumbel_max_select(log_weights, rng: np.random.Generator, size=None):
    """Draw index ``i`` with probability proportional to ``exp(log_weights[i])``.

    ``-inf`` entries are never chosen. With ``size`` set, returns an array of
    that many independent selections.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise DomainError("log_weights must be a non-empty vector")
    if not np.any(lw > -np.inf):
        raise DomainError("all log-weights are -inf")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise DomainError("log-weights must be finite or -inf")
    if size is None:
        eps = sample_noise(lw.size, rng)
        return argmax_lowest(np.where(lw > -np.inf, eps + lw, -np.inf))
    eps = sample_gumbel(rng, (int(size), lw.size))
    return np.argmax(np.where(lw > -np.inf, eps + lw, -np.inf), axis=1)
