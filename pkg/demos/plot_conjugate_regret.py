"""
Racing versus closed-form Thompson sampling on Beta-Bernoulli arms
==================================================================

With a conjugate prior both policies target the same posterior, so their
regret should be comparable. The racing policy additionally reports how many
proposal draws each decision needed.
"""

from racingts import preset, run_experiment, summarize

cfg = preset("conjugate", replications=4, horizon=300, arms=5)
table = run_experiment(cfg)
for row in summarize(table):
    lo, hi = row.ci95
    print(f"{row.agent:8s} final regret {row.final_regret_mean:6.2f}  "
          f"95% band [{lo:6.2f}, {hi:6.2f}]  samples/step {row.mean_samples_per_step:.0f}")
