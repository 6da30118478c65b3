"""Command-line runner for the regret experiments.

Configuration is layered: experiment preset, then ``--config`` file, then
flags. The config file holds ``key = value`` lines (``#`` starts a comment);
every key is also accepted as a flag of the same name.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, preset, run_experiment, summarize, summary_csv

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TYPES = {"arms": int, "horizon": int, "replications": int, "batch_size": int, "absolute_cap": int,
          "smc_particles": int, "topic_dim": int, "seed": int, "workers": int,
          "delta": float, "sigma": float, "smc_resample": "bool", "warm_start": "bool"}


def _convert(key: str, value: str):
    kind = _TYPES.get(key, str)
    try:
        if kind == "bool":
            low = value.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(value)
            return low in ("1", "true", "yes", "on")
        return kind(value.strip())
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r}") from None


def read_config_file(path) -> dict:
    """Parse a ``key = value`` file into typed overrides."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = _convert(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="racingts", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output path for the per-step table ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    for name in _FIELDS:
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        kw = {"dest": name, "default": None}
        if name == "experiment":
            kw["choices"] = EXPERIMENTS
        p.add_argument(*flags, **kw)
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for name in _FIELDS:
        raw = getattr(args, name)
        if raw is not None:
            values[name] = raw if name == "experiment" else _convert(name, raw)
    experiment = values.pop("experiment", "custom")
    return preset(experiment, **values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        table = run_experiment(cfg)
    except (ConfigError, OSError) as exc:
        print(f"racingts: configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure is reported, not traced
        print(f"racingts: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    body = table.to_csv() if args.format == "csv" else table.to_json()
    if args.out == "-":
        sys.stdout.write(body)
    elif args.out:
        out = Path(args.out)
        out.write_text(body, encoding="utf-8")
        Path(f"{out}.meta.json").write_text(json.dumps(table.metadata(), indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
        if table.records:
            Path(f"{out}.curves.csv").write_text(table.curves_csv(), encoding="utf-8")
    if table.records and args.out != "-":
        sys.stdout.write(summary_csv(summarize(table)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
