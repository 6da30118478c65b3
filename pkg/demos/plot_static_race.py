"""
One race: picking the arm with the largest perturbed score
===========================================================

A race estimates K expectations from shared proposal draws and stops as soon
as the empirical leader is separated from the runner-up.
"""

import numpy as np

from racingts import (Family, PosteriorState, RacingConfig, conjugate_update, m_max,
                      make_beta_prior, race, threshold_beta)

# The confidence radius shrinks like sqrt(log log m / m)
for m in (1, 10, 100, 1000):
    print(f"beta({m}, 0.1) = {float(threshold_beta(m, 0.1)):.4f}")
print("hard cap for delta=sigma=0.1:", m_max(0.1, 0.1))

# Three Bernoulli arms, Beta(2, 2) prior, a few observations each
prior = make_beta_prior([2, 2, 2], [2, 2, 2])
state = PosteriorState.empty([Family.BERNOULLI] * 3)
for arm, successes in enumerate([4, 3, 2]):
    for i in range(6):
        state = conjugate_update(state, arm, float(i < successes))

rng = np.random.default_rng(1)
noise = np.array([0.0, 0.4, 0.2])
out = race(noise, prior, state, RacingConfig(delta=0.05, sigma=0.1), rng)
print("chosen arm:", out.chosen_arm, "after", out.samples_used, "samples")
print("scaled estimates:", np.round(out.estimates, 4), "stopped by", out.stopped_by.value)
