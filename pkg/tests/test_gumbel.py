import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from racingts.distributions import DomainError
from racingts.gumbel import gumbel_from_uniform, gumbel_max_select, sample_gumbel

EULER_GAMMA = 0.5772156649015329


def test_transform_values():
    # -log(-log 0.5), evaluated with mpmath at 30 digits
    assert gumbel_from_uniform(0.5) == pytest.approx(0.366512920581664327, abs=1e-12)
    assert gumbel_from_uniform(math.exp(-1)) == pytest.approx(0.0, abs=1e-15)


def test_mean_is_euler_gamma(rng):
    numeric, _ = integrate.quad(lambda x: x * np.exp(-x - np.exp(-x)), -40, 60, limit=200)
    assert numeric == pytest.approx(EULER_GAMMA, abs=1e-8)
    assert abs(sample_gumbel(rng, 1_000_000).mean() - numeric) < 0.01


def test_boundary_uniforms_are_redrawn():
    class Stub:
        def __init__(self):
            self.calls = 0

        def random(self, size):
            self.calls += 1
            return np.zeros(size) if self.calls == 1 else np.full(size, 0.5)

    assert sample_gumbel(Stub()) == pytest.approx(0.366512920581664)


def test_scalar_draw_is_float(rng):
    assert isinstance(sample_gumbel(rng), float)


def test_degenerate_weights_always_pick_the_live_index(rng):
    for _ in range(200):
        assert gumbel_max_select([0.0, -np.inf, -np.inf], rng) == 0


def test_all_minus_inf_is_an_error(rng):
    with pytest.raises(DomainError):
        gumbel_max_select([-np.inf, -np.inf], rng)


def _freqs(logw, n, seed):
    rng = np.random.default_rng(seed)
    picks = [gumbel_max_select(logw, rng) for _ in range(n)]
    return np.bincount(picks, minlength=len(logw)) / n


def test_symmetric_pair():
    f = _freqs(np.log([0.5, 0.5]), 100_000, 1)
    assert abs(f[0] - 0.5) < 0.01


def test_categorical_chi_square():
    p = np.array([0.2, 0.3, 0.5])
    n = 100_000
    counts = _freqs(np.log(p), n, 2) * n
    chi2 = ((counts - n * p) ** 2 / (n * p)).sum()
    assert chi2 < 13.8


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(-100, 100), st.integers(0, 2**31))
def test_shift_invariance(logw, c, seed):
    a = gumbel_max_select(np.array(logw), np.random.default_rng(seed))
    b = gumbel_max_select(np.array(logw) + c, np.random.default_rng(seed))
    if a != b:
        # only a floating-point near tie can flip the argmax
        eps = sample_gumbel(np.random.default_rng(seed), len(logw))
        s = np.sort(eps + np.array(logw))
        assert s[-1] - s[-2] < 1e-9 * max(1.0, abs(c))


def test_determinism():
    assert _freqs([0.1, 0.2, 0.3], 500, 9).tolist() == _freqs([0.1, 0.2, 0.3], 500, 9).tolist()


def test_batched_select_matches_frequencies(rng):
    picks = gumbel_max_select(np.log([0.1, 0.0 + 1e-300, 0.9]), rng, size=20_000)
    assert picks.shape == (20_000,)
    assert abs(np.mean(picks == 2) - 0.9) < 0.01
    assert not np.any(gumbel_max_select([0.0, -np.inf], rng, size=1000) == 1)
