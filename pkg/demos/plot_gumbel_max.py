"""
Sampling a categorical variable with Gumbel noise
==================================================

Adding independent Gumbel(0, 1) noise to log-probabilities and taking the
argmax yields an exact draw from the categorical distribution.
"""

import numpy as np

from racingts import gumbel_max_select

rng = np.random.default_rng(0)
p = np.array([0.2, 0.3, 0.5])

# one draw at a time ...
print("single draw:", gumbel_max_select(np.log(p), rng))

# ... or a whole batch at once
picks = gumbel_max_select(np.log(p), rng, size=100_000)
print("empirical:", np.bincount(picks) / picks.size, "target:", p)

# zero-probability entries (log weight -inf) are never selected
print("masked:", np.unique(gumbel_max_select([0.0, -np.inf, 1.0], rng, size=1000)))
