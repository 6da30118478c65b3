"""Seeded regret experiments: configuration, execution, aggregation and output."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .agents import RacingTS, SMCTS, UniformRandom, VanillaTS
from .distributions import (Family, make_beta_prior, make_truncated_gaussian_prior,
                            make_uniform_prior)
from .env import RegretTrace, draw_instance, pull
from .racing import RacingConfig

CSV_HEADER = ["experiment", "agent", "replication", "step", "arm", "reward", "cum_regret", "samples_used"]
EXPERIMENTS = ("sensitivity", "conjugate", "nonconjugate", "dependent", "custom")
GRID = (0.1, 0.3, 0.5, 0.7)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "custom"
    arms: int = 10
    horizon: int = 1000
    replications: int = 10
    agents: tuple = ("racing", "vanilla")
    prior: str = "beta:1,1"
    vanilla_prior: str = "true"
    racing_proposal: str = "auto"
    delta: float = 0.1
    sigma: float = 0.1
    batch_size: int = 1
    absolute_cap: int = 1_000_000
    smc_mode: str = "schedule"
    smc_particles: int = 400
    smc_resample: bool = False
    topic_dim: int = 0
    warm_start: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.agents, str):
            object.__setattr__(self, "agents", tuple(a.strip() for a in self.agents.split(",") if a.strip()))
        else:
            object.__setattr__(self, "agents", tuple(self.agents))
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        for name in ("arms", "horizon", "batch_size", "absolute_cap", "smc_particles", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be a positive integer")
        if self.replications < 0:
            raise ConfigError("replications", "must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", "must lie in (0, 1)")
        if not self.sigma > 0:
            raise ConfigError("sigma", "must be positive")
        if self.smc_mode not in ("schedule", "fixed"):
            raise ConfigError("smc_mode", "must be 'schedule' or 'fixed'")
        if self.racing_proposal not in ("auto", "uniform", "matched"):
            raise ConfigError("racing_proposal", "must be auto, uniform or matched")
        if not self.agents:
            raise ConfigError("agents", "at least one agent is required")
        for token in self.agents:
            parse_agent(token)
        if self.smc_mode == "schedule" and any(parse_agent(a)[0] == "smc" for a in self.agents) \
                and not any(parse_agent(a)[0] == "racing" for a in self.agents):
            raise ConfigError("smc_mode", "schedule mode needs a racing agent to copy particle counts from")
        parse_prior(self.prior)
        if self.vanilla_prior != "true":
            parse_prior(self.vanilla_prior)


def preset(name: str, **overrides) -> ExperimentConfig:
    """Configuration for one of the named experiments, with keyword overrides."""
    base = {
        "sensitivity": dict(prior="beta:5,5", replications=10,
                            agents=tuple(f"racing:delta={d}:sigma={s}" for d in GRID for s in GRID)),
        "conjugate": dict(prior="beta_random:1,10", replications=100, agents=("racing", "vanilla")),
        "nonconjugate": dict(prior="truncnorm:0.5,1", replications=100, vanilla_prior="beta_random:1,10",
                             agents=("racing", "smc", "vanilla")),
        "dependent": dict(prior="dependent:0.5", replications=100, vanilla_prior="beta_random:1,10",
                          agents=("racing", "smc", "vanilla")),
        "custom": {},
    }
    if name not in base:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    values = dict(base[name], experiment=name)
    values.update(overrides)
    return ExperimentConfig(**values)


def parse_agent(token: str):
    """``"racing:delta=0.1:sigma=0.3"`` -> ``("racing", {"delta": 0.1, "sigma": 0.3})``."""
    parts = token.split(":")
    kind, opts = parts[0], {}
    if kind not in ("racing", "vanilla", "smc", "random"):
        raise ConfigError("agents", f"unknown agent {kind!r}")
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ConfigError("agents", f"malformed option {part!r} in {token!r}")
        if key in ("delta", "sigma"):
            opts[key] = float(value)
        elif key in ("batch_size", "absolute_cap", "particles"):
            opts[key] = int(value)
        elif key in ("proposal", "prior", "mode"):
            opts[key] = value
        else:
            raise ConfigError("agents", f"unknown option {key!r} in {token!r}")
    return kind, opts


def parse_prior(text: str):
    kind, _, args = text.partition(":")
    try:
        nums = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ConfigError("prior", f"bad numbers in {text!r}") from None
    expected = {"uniform": 0, "beta": 2, "beta_random": 2, "truncnorm": 2, "dependent": 1}
    if kind not in expected:
        raise ConfigError("prior", f"unknown prior {kind!r}")
    if len(nums) != expected[kind]:
        raise ConfigError("prior", f"{kind} takes {expected[kind]} numbers")
    return kind, nums


def dependent_covariance(k: int, rng: np.random.Generator, dim: int = 0, floor: float = 1e-6):
    """Unit-diagonal covariance with off-diagonal entries u_i . u_j.

    The ``u_i`` are uniform on the unit sphere in ``dim`` dimensions
    (``dim=0`` means ``k``). Eigenvalues below ``floor`` are clipped; the
    Frobenius distance of that projection is returned alongside.
    """
    dim = dim or k
    u = rng.standard_normal((k, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    sigma = u @ u.T
    np.fill_diagonal(sigma, 1.0)
    vals, vecs = np.linalg.eigh(sigma)
    fixed = (vecs * np.maximum(vals, floor)) @ vecs.T
    fixed = 0.5 * (fixed + fixed.T)
    return fixed, float(np.linalg.norm(fixed - sigma)), u


def build_prior(text: str, k: int, rng: np.random.Generator, topic_dim: int = 0):
    """PriorSpec plus a JSON-ready description of the drawn hyperparameters."""
    kind, nums = parse_prior(text)
    if kind == "uniform":
        return make_uniform_prior(k), {"prior": "uniform"}
    if kind == "beta":
        return make_beta_prior(np.full(k, nums[0]), np.full(k, nums[1])), {"prior": "beta", "a": nums[0], "b": nums[1]}
    if kind == "beta_random":
        a = rng.uniform(nums[0], nums[1], k)
        b = rng.uniform(nums[0], nums[1], k)
        return make_beta_prior(a, b), {"prior": "beta", "a": a.tolist(), "b": b.tolist()}
    if kind == "truncnorm":
        mean, var = nums
        pr = make_truncated_gaussian_prior(np.full(k, mean), np.eye(k) * var, rng=rng)
        return pr, {"prior": "truncnorm", "mean": mean, "variance": var}
    cov, dist, u = dependent_covariance(k, rng, topic_dim)
    pr = make_truncated_gaussian_prior(np.full(k, nums[0]), cov, rng=rng)
    return pr, {"prior": "dependent", "mean": nums[0], "topic_vectors": u.tolist(),
                "pd_projection_distance": dist, "acceptance": pr.metadata["acceptance"]}


@dataclass
class RunRecord:
    agent: str
    replication: int
    arms: np.ndarray
    rewards: np.ndarray
    cum_regret: np.ndarray
    samples_used: np.ndarray  # -1 where no sampling happened

    @property
    def final_regret(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0

    @property
    def mean_samples(self) -> float:
        s = self.samples_used[self.samples_used >= 0]
        return float(s.mean()) if s.size else math.nan


@dataclass
class ResultTable:
    config: ExperimentConfig
    records: List[RunRecord] = field(default_factory=list)
    replication_meta: List[dict] = field(default_factory=list)

    def agents(self) -> List[str]:
        return list(dict.fromkeys(r.agent for r in self.records))

    def by_agent(self, agent: str) -> List[RunRecord]:
        return [r for r in self.records if r.agent == agent]

    def rows(self) -> Iterable[list]:
        exp = self.config.experiment
        for r in self.records:
            for t in range(r.arms.size):
                s = int(r.samples_used[t])
                yield [exp, r.agent, r.replication, t + 1, int(r.arms[t]), _fmt(r.rewards[t]),
                       _fmt(r.cum_regret[t]), "" if s < 0 else s]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(CSV_HEADER, row)) for row in self.rows()]
        for row in rows:
            row["reward"] = float(row["reward"])
            row["cum_regret"] = float(row["cum_regret"])
            row["samples_used"] = None if row["samples_used"] == "" else row["samples_used"]
        return json.dumps(rows, separators=(",", ":")) + "\n"

    def curves(self) -> List[dict]:
        """Per agent and step: mean cumulative regret with a 95% normal band."""
        out = []
        for agent in self.agents():
            recs = self.by_agent(agent)
            reg = np.vstack([r.cum_regret for r in recs])
            samp = np.vstack([r.samples_used for r in recs]).astype(float)
            samp[samp < 0] = np.nan
            mean = reg.mean(axis=0)
            half = 1.96 * _stderr(reg)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                ms = np.nanmean(samp, axis=0)
            for t in range(reg.shape[1]):
                out.append({"agent": agent, "step": t + 1, "mean_cum_regret": mean[t],
                            "ci_low": mean[t] - half[t], "ci_high": mean[t] + half[t],
                            "mean_samples_used": ms[t]})
        return out

    def curves_csv(self) -> str:
        buf = io.StringIO()
        keys = ["agent", "step", "mean_cum_regret", "ci_low", "ci_high", "mean_samples_used"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for row in self.curves():
            w.writerow([row["agent"], row["step"]] + [_fmt_opt(row[k]) for k in keys[2:]])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"config": dataclasses.asdict(self.config), "seed": self.config.seed,
                "version": __version__, "replications": self.replication_meta,
                "csv_header": CSV_HEADER}


def _fmt(x) -> str:
    return f"{float(x):.6g}"


def _fmt_opt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else _fmt(x)


def _stderr(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    if n < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / math.sqrt(n)


def _make_agent(token: str, cfg: ExperimentConfig, prior, families, vanilla_ab, schedule, rng):
    kind, opts = parse_agent(token)
    if kind == "random":
        return UniformRandom(families, warm_start=cfg.warm_start)
    if kind == "vanilla":
        return VanillaTS(families, *vanilla_ab, warm_start=cfg.warm_start)
    if kind == "racing":
        rc = RacingConfig(opts.get("delta", cfg.delta), opts.get("sigma", cfg.sigma),
                          opts.get("batch_size", cfg.batch_size), opts.get("absolute_cap", cfg.absolute_cap))
        proposal = opts.get("proposal", cfg.racing_proposal)
        if proposal == "auto":
            proposal = "matched" if prior.name == "beta" else "uniform"
        return RacingTS(prior, families, rc, proposal=proposal, warm_start=cfg.warm_start)
    mode = opts.get("mode", cfg.smc_mode)
    if mode == "schedule":
        return SMCTS(prior, families, schedule=schedule, resample=cfg.smc_resample, rng=rng,
                     warm_start=cfg.warm_start)
    return SMCTS(prior, families, n_particles=opts.get("particles", cfg.smc_particles),
                 resample=cfg.smc_resample, rng=rng, warm_start=cfg.warm_start)


def _vanilla_prior(cfg: ExperimentConfig, prior, k: int, rng, meta: dict):
    if cfg.vanilla_prior == "true":
        if prior.name != "beta":
            raise ConfigError("vanilla_prior", "'true' needs a Beta experiment prior")
        return np.asarray(prior.metadata["a"]), np.asarray(prior.metadata["b"])
    vp, vmeta = build_prior(cfg.vanilla_prior, k, rng)
    if vp.name not in ("beta", "uniform"):
        raise ConfigError("vanilla_prior", "vanilla Thompson sampling needs a Beta prior")
    meta["vanilla_prior"] = vmeta
    if vp.name == "uniform":
        return np.ones(k), np.ones(k)
    return np.asarray(vp.metadata["a"]), np.asarray(vp.metadata["b"])


def run_replication(cfg: ExperimentConfig, rep: int):
    """All agents on one replication. Seeds derive from ``seed XOR rep``."""
    k, horizon = cfg.arms, cfg.horizon
    root = np.random.SeedSequence(cfg.seed ^ rep)
    prior_ss, inst_ss, env_ss, vanilla_ss, *agent_ss = root.spawn(4 + len(cfg.agents))
    prior, meta = build_prior(cfg.prior, k, np.random.default_rng(prior_ss), cfg.topic_dim)
    meta = {"replication": rep, **meta}
    instance = draw_instance(prior, Family.BERNOULLI, np.random.default_rng(inst_ss))
    meta["true_means"] = instance.means.tolist()
    families = [Family.BERNOULLI] * k
    needs_vanilla = any(parse_agent(a)[0] == "vanilla" for a in cfg.agents)
    vanilla_ab = _vanilla_prior(cfg, prior, k, np.random.default_rng(vanilla_ss), meta) if needs_vanilla else None

    order = sorted(range(len(cfg.agents)), key=lambda i: parse_agent(cfg.agents[i])[0] == "smc")
    records = {}
    schedule = None
    for i in order:
        token = cfg.agents[i]
        decide_ss, particle_ss = agent_ss[i].spawn(2)
        agent = _make_agent(token, cfg, prior, families, vanilla_ab, schedule,
                            np.random.default_rng(particle_ss))
        rng = np.random.default_rng(decide_ss)
        env_rng = np.random.default_rng(env_ss)
        arms = np.empty(horizon, dtype=np.int64)
        rewards = np.empty(horizon)
        samples = np.full(horizon, -1, dtype=np.int64)
        for t in range(horizon):
            d = agent.decide(rng)
            x = pull(instance, d.arm, env_rng)
            agent.update(d.arm, x)
            arms[t], rewards[t] = d.arm, x
            if d.samples_used is not None:
                samples[t] = d.samples_used
        if schedule is None and isinstance(agent, RacingTS):
            schedule = [None if s < 0 else int(s) for s in samples]
        cum = RegretTrace(instance, arms).cumulative()
        records[i] = RunRecord(token, rep, arms, rewards, cum, samples)
    return [records[i] for i in range(len(cfg.agents))], meta


def run_experiment(cfg: ExperimentConfig, progress: Optional[Callable[[int], None]] = None) -> ResultTable:
    """Run every replication; the result does not depend on ``workers``."""
    reps = list(range(cfg.replications))
    if cfg.workers > 1 and len(reps) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_replication, [cfg] * len(reps), reps))
    else:
        results = []
        for rep in reps:
            results.append(run_replication(cfg, rep))
            if progress:
                progress(rep)
    table = ResultTable(cfg)
    for agent_idx in range(len(cfg.agents)):
        for recs, _ in results:
            table.records.append(recs[agent_idx])
    table.replication_meta = [meta for _, meta in results]
    return table


@dataclass(frozen=True)
class SummaryRow:
    agent: str
    replications: int
    final_regret_mean: float
    final_regret_stderr: float
    mean_samples_per_step: float

    @property
    def ci95(self):
        h = 1.96 * self.final_regret_stderr
        return self.final_regret_mean - h, self.final_regret_mean + h


def summarize(table: ResultTable) -> List[SummaryRow]:
    """Per agent: final-regret mean and standard error, mean samples per decision."""
    if not table.records:
        raise ValueError("cannot summarize an empty result table")
    out = []
    for agent in table.agents():
        recs = table.by_agent(agent)
        finals = np.array([r.final_regret for r in recs])
        samp = np.concatenate([r.samples_used[r.samples_used >= 0] for r in recs])
        out.append(SummaryRow(agent, len(recs), float(finals.mean()),
                              float(_stderr(finals[:, None])[0]),
                              float(samp.mean()) if samp.size else math.nan))
    return out


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "replications", "final_regret_mean", "final_regret_stderr",
                "ci95_low", "ci95_high", "mean_samples_per_step"])
    for r in rows:
        lo, hi = r.ci95
        w.writerow([r.agent, r.replications, _fmt(r.final_regret_mean), _fmt(r.final_regret_stderr),
                    _fmt(lo), _fmt(hi), _fmt_opt(r.mean_samples_per_step)])
    return buf.getvalue()
