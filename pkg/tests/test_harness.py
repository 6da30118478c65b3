import json

import numpy as np
import pytest

from racingts.cli import main, read_config_file
from racingts.harness import (CSV_HEADER, ConfigError, ExperimentConfig, ResultTable, RunRecord,
                              dependent_covariance, parse_agent, preset, run_experiment, summarize)

SMALL = dict(arms=3, horizon=30, replications=2, seed=11)


def small(name="conjugate", **kw):
    return preset(name, **{**SMALL, **kw})


def test_csv_header_is_exact():
    text = run_experiment(small()).to_csv()
    assert text.splitlines()[0] == "experiment,agent,replication,step,arm,reward,cum_regret,samples_used"
    assert CSV_HEADER == text.splitlines()[0].split(",")


def test_csv_rows_and_samples_column():
    table = run_experiment(small())
    lines = table.to_csv().splitlines()[1:]
    assert len(lines) == 2 * 2 * 30
    racing = [l.split(",") for l in lines if l.split(",")[1] == "racing"]
    vanilla = [l.split(",") for l in lines if l.split(",")[1] == "vanilla"]
    assert all(r[7] == "" for r in racing[:3])  # warm start
    assert all(r[7].isdigit() for r in racing[3:30])
    assert all(v[7] == "" for v in vanilla)


def test_rerun_is_byte_identical():
    assert run_experiment(small("nonconjugate")).to_csv() == run_experiment(small("nonconjugate")).to_csv()


def test_workers_do_not_change_output():
    assert run_experiment(small(workers=2)).to_csv() == run_experiment(small(workers=1)).to_csv()


def test_zero_replications_gives_empty_table():
    table = run_experiment(small(replications=0))
    assert table.records == [] and table.to_csv() == ",".join(CSV_HEADER) + "\n"
    with pytest.raises(ValueError):
        summarize(table)


def _table(finals, samples=None):
    cfg = ExperimentConfig(agents=("vanilla",))
    recs = []
    for i, f in enumerate(finals):
        s = np.full(2, -1) if samples is None else np.asarray(samples[i])
        recs.append(RunRecord("vanilla", i, np.zeros(2, int), np.zeros(2), np.array([0.0, f]), s))
    return ResultTable(cfg, recs)


def test_summarize_examples():
    (row,) = summarize(_table([7.0]))
    assert row.final_regret_mean == 7.0 and row.final_regret_stderr == 0.0
    (row,) = summarize(_table([10.0, 20.0], samples=[[3, 5], [-1, 4]]))
    assert row.final_regret_mean == 15.0 and row.mean_samples_per_step == pytest.approx(4.0)
    (row,) = summarize(_table([0.0, 0.0, 0.0]))
    assert (row.final_regret_mean, row.final_regret_stderr) == (0.0, 0.0)


def test_curves_band():
    curves = _table([10.0, 20.0]).curves()
    last = curves[-1]
    half = 1.96 * np.std([10.0, 20.0], ddof=1) / np.sqrt(2)
    assert last["mean_cum_regret"] == 15.0 and last["ci_high"] - 15.0 == pytest.approx(half)


def test_sensitivity_preset_grid():
    cfg = preset("sensitivity")
    assert len(cfg.agents) == 16 and cfg.prior == "beta:5,5" and cfg.replications == 10
    assert parse_agent(cfg.agents[1]) == ("racing", {"delta": 0.1, "sigma": 0.3})


@pytest.mark.parametrize("kw, field", [
    (dict(horizon=0), "horizon"), (dict(delta=1.5), "delta"), (dict(agents="racing,bogus"), "agents"),
    (dict(prior="gamma:1"), "prior"), (dict(agents="smc,vanilla"), "smc_mode"), (dict(replications=-1), "replications"),
])
def test_config_errors_name_the_field(kw, field):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(**kw)
    assert err.value.field == field


def test_dependent_covariance_structure():
    cov, dist, u = dependent_covariance(10, np.random.default_rng(0))
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0)
    off = ~np.eye(10, dtype=bool)
    np.testing.assert_allclose(cov[off], (u @ u.T)[off], atol=1e-9)
    np.testing.assert_allclose(np.diag(cov), 1.0, atol=1e-9)
    assert np.linalg.eigvalsh(cov).min() > 0 and dist < 1e-9


def test_dependent_covariance_projects_low_rank():
    cov, dist, _ = dependent_covariance(6, np.random.default_rng(1), dim=2)
    assert np.linalg.eigvalsh(cov).min() >= 1e-6 * (1 - 1e-6) and dist > 0


def test_metadata_records_projection_and_defaults():
    table = run_experiment(small("dependent", replications=1))
    meta = table.metadata()
    rep = meta["replications"][0]
    assert "pd_projection_distance" in rep and rep["mean"] == 0.5
    nonconj = run_experiment(small("nonconjugate", replications=1)).metadata()["replications"][0]
    assert (nonconj["mean"], nonconj["variance"]) == (0.5, 1.0)
    json.dumps(meta)


def test_smc_follows_racing_schedule():
    table = run_experiment(small("nonconjugate", replications=1))
    racing, smc = table.by_agent("racing")[0], table.by_agent("smc")[0]
    np.testing.assert_array_equal(racing.samples_used, smc.samples_used)


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# tiny run\nexperiment = conjugate\narms = 3\nhorizon = 20  # short\nreplications = 2\n")
    out = tmp_path / "out.csv"
    assert main(["--config", str(cfg), "--seed", "5", "--out", str(out), "--agents", "racing,vanilla,random"]) == 0
    first = out.read_bytes()
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert meta["seed"] == 5 and meta["config"]["horizon"] == 20
    assert (tmp_path / "out.csv.curves.csv").exists()
    assert "final_regret_mean" in capsys.readouterr().out
    assert main(["--config", str(cfg), "--seed", "5", "--out", str(out), "--agents", "racing,vanilla,random"]) == 0
    assert out.read_bytes() == first


def test_cli_json_format(tmp_path):
    out = tmp_path / "out.json"
    assert main(["--experiment", "conjugate", "--arms", "2", "--horizon", "5", "--replications", "1",
                 "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 10 and set(rows[0]) == set(CSV_HEADER)


def test_cli_zero_replications(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["--experiment", "conjugate", "--replications", "0", "--out", str(out)]) == 0
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_cli_configuration_errors(tmp_path, capsys):
    assert main(["--delta", "3"]) != 0
    assert "delta" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["--config", str(bad)]) != 0
    assert "nonsense" in capsys.readouterr().err


def test_config_file_types(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("delta = 0.3\nwarm_start = false\nagents = racing, vanilla\n")
    assert read_config_file(f) == {"delta": 0.3, "warm_start": False, "agents": "racing, vanilla"}
