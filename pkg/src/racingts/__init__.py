"""Thompson sampling for non-conjugate priors via Gumbel-Max racing."""

__version__ = "0.1.0"

from .distributions import (DomainError, Family, PosteriorState, PriorSpec, RewardFamily,
                            WarmStartError, conjugate_update, likelihood, make_beta_prior,
                            make_point_mass_prior, make_truncated_gaussian_prior,
                            make_uniform_prior, proposal_log_density, sample_proposal)
from .gumbel import gumbel_max_select, sample_gumbel
from .racing import RacingConfig, RacingOutcome, StopReason, f_eval, m_max, race, threshold_beta
from .smc import ParticleSet, effective_sample_size, init_particles, reweight, sample_mean_vector
from .agents import RacingTS, SMCTS, UniformRandom, VanillaTS
from .env import BanditInstance, RegretTrace, draw_instance, pull, regret
from .harness import ExperimentConfig, preset, run_experiment, summarize

__all__ = [name for name in dir() if not name.startswith("_")]
