import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from racingts.distributions import PosteriorState, make_point_mass_prior, make_uniform_prior, make_beta_prior
from racingts.gumbel import sample_noise
from racingts.racing import RacingConfig, StopReason, f_eval, m_max, race, threshold_beta


def beta_oracle(m, delta):
    mp.mp.dps = 30
    m, delta = mp.mpf(m), mp.mpf(delta)
    bracket = mp.log(1 / delta) + 3 * mp.log(mp.log(1 / delta)) + mp.mpf(3) / 2 * mp.log(mp.log(mp.e * m / 2))
    return float(mp.sqrt(max(bracket, 0) / (2 * m)))


def state_with(ones, zeros):
    s = PosteriorState.empty(["bernoulli"] * len(ones))
    s.counts[:] = np.add(ones, zeros)
    s.sums[:] = ones
    return s


@pytest.mark.parametrize("m, delta, expected", [(100, 0.1, 0.189634), (1, 0.1, 1.231383)])
def test_threshold_values(m, delta, expected):
    assert threshold_beta(m, delta) == pytest.approx(expected, abs=1e-5)
    assert threshold_beta(m, delta) == pytest.approx(beta_oracle(m, delta), abs=1e-12)


def test_threshold_clamps_negative_bracket():
    assert threshold_beta(1, 0.7) == 0.0


def test_threshold_nonincreasing_for_delta_01():
    b = threshold_beta(np.arange(1, 1_000_001), 0.1)
    assert np.all(np.diff(b) <= 0)


def _m_max_oracle(delta, sigma):
    m = 1
    while 2 * beta_oracle(m, delta) > sigma:
        m += 1
    return m


def test_m_max_values():
    assert m_max(0.1, 0.5) == 57 == _m_max_oracle(0.1, 0.5)
    assert m_max(0.7, 0.3) == 1
    m = m_max(0.1, 0.1)
    assert 2 * beta_oracle(m - 1, 0.1) > 0.1 >= 2 * beta_oracle(m, 0.1)


def test_m_max_reports_overflow_of_limit():
    assert m_max(0.1, 0.001, limit=1000) == 1001


def test_f_eval_examples():
    prior = make_uniform_prior(2)
    s = PosteriorState.empty(["bernoulli"] * 2)
    np.testing.assert_allclose(f_eval([0, 0], prior, s, [0.7, 0.3]), [1.0, 0.0])
    np.testing.assert_allclose(f_eval([0, 2], prior, s, [0.7, 0.3]), [1.0, 0.0])
    np.testing.assert_allclose(f_eval([1, 0], prior, s, [0.3, 0.7]), [0.0, 1.0])


def test_f_eval_outside_prior_support_is_zero():
    prior = make_point_mass_prior([0.5, 0.5])
    s = PosteriorState.empty(["bernoulli"] * 2)
    assert f_eval([0, 0], prior, s, [0.7, 0.3]).tolist() == [0.0, 0.0]


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6), st.integers(0, 2**31))
def test_f_eval_single_nonzero(mu, seed):
    k = len(mu)
    noise = sample_noise(k, np.random.default_rng(seed))
    v = f_eval(noise, make_uniform_prior(k), PosteriorState.empty(["bernoulli"] * k), mu)
    assert np.count_nonzero(v) == 1
    assert np.count_nonzero(v == v.max()) == 1 and int(np.argmax(v)) == int(np.argmax(mu))


def test_race_picks_dominant_arm():
    prior = make_uniform_prior(2)
    s = state_with([99, 0], [0, 99])
    cfg = RacingConfig(0.1, 0.1)
    rng = np.random.default_rng(3)
    picks = [race(sample_noise(2, rng), prior, s, cfg, rng).chosen_arm for _ in range(1000)]
    assert picks.count(0) >= 990


def test_race_symmetric_case_is_fair():
    prior = make_uniform_prior(2)
    s = PosteriorState.empty(["bernoulli"] * 2)
    cfg = RacingConfig(0.1, 0.1)
    rng = np.random.default_rng(4)
    picks = [race(sample_noise(2, rng), prior, s, cfg, rng).chosen_arm for _ in range(10_000)]
    assert abs(np.mean(picks) - 0.5) < 0.02


def test_chosen_arm_is_argmax_of_unscaled_estimates(rng):
    prior = make_beta_prior([2.0, 3.0, 4.0], [3.0, 2.0, 4.0])
    s = state_with([3, 5, 1], [4, 2, 2])
    for _ in range(50):
        out = race(sample_noise(3, rng), prior, s, RacingConfig(0.2, 0.2), rng)
        raw = out.estimates * math.exp(out.log_scale)
        assert out.chosen_arm == int(np.argmax(raw)) == int(np.argmax(out.estimates))
        assert np.all((out.estimates >= 0) & (out.estimates <= 1))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 50), st.sampled_from([0.05, 0.1, 0.3, 0.7]), st.sampled_from([0.05, 0.1, 0.5]),
       st.integers(1, 5000), st.integers(0, 2**31))
def test_race_terminates_within_limit(n_obs, delta, sigma, cap, seed):
    # equal-mean proposals are the hardest case for separation
    rng = np.random.default_rng(seed)
    s = state_with([n_obs] * 3, [n_obs] * 3)
    cfg = RacingConfig(delta, sigma, absolute_cap=cap)
    out = race(sample_noise(3, rng), make_uniform_prior(3), s, cfg, rng)
    assert 1 <= out.samples_used <= min(m_max(delta, sigma), cap) == cfg.sample_limit


def test_absolute_cap_is_reported(rng):
    cfg = RacingConfig(0.1, 0.01, absolute_cap=50)
    s = state_with([5] * 3, [5] * 3)
    out = race(np.zeros(3), make_uniform_prior(3), s, cfg, rng)
    assert out.samples_used == 50 and out.stopped_by is StopReason.ABSOLUTE_CAP


def test_batching_checks_only_at_multiples(rng):
    cfg = RacingConfig(0.1, 0.3, batch_size=7)
    s = state_with([2, 2], [2, 2])
    for _ in range(30):
        out = race(sample_noise(2, rng), make_uniform_prior(2), s, cfg, rng)
        assert out.samples_used % 7 == 0 or out.samples_used == cfg.sample_limit


def test_large_delta_stops_after_one_sample(rng):
    out = race(sample_noise(4, rng), make_uniform_prior(4), PosteriorState.empty(["bernoulli"] * 4),
               RacingConfig(0.7, 0.7), rng)
    assert out.samples_used == 1 and out.stopped_by is StopReason.THRESHOLD


def test_degenerate_prior_returns_lowest_index(rng):
    # the proposal never hits the point mass, so every estimate is zero
    out = race(np.zeros(3), make_point_mass_prior([0.5, 0.5, 0.5]), PosteriorState.empty(["bernoulli"] * 3),
               RacingConfig(0.1, 0.5), rng)
    assert out.degenerate and out.chosen_arm == 0


def test_race_is_deterministic():
    s = state_with([3, 4], [5, 2])
    runs = [race(np.array([0.1, 0.4]), make_uniform_prior(2), s, RacingConfig(), np.random.default_rng(5))
            for _ in range(2)]
    assert runs[0].samples_used == runs[1].samples_used
    np.testing.assert_array_equal(runs[0].estimates, runs[1].estimates)


@pytest.mark.parametrize("kwargs", [dict(delta=0.0), dict(delta=1.0), dict(sigma=0.0), dict(batch_size=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RacingConfig(**kwargs)
