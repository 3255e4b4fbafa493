"""Command-line entry point: ``shimr run|montecarlo|sweep|scenarios``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines (keys are the long flag names without dashes), then
explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path

from . import __version__, output
from .engine import run_simulation
from .metrics import (
    EnsembleSummary,
    FinalState,
    build_histogram,
    pooled_correlation,
    pooled_opinions,
    pooled_weights,
)
from .model import ConfigError, ModelParams, RunConfig, config_violations, params_violations
from .scenarios import CUSTOM, PRESETS

log = logging.getLogger("shimr")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

# key -> (converter, default); keys double as long flag names
SETTINGS = {
    "scenario": (str, "radical-controversy"),
    "influencers": (str, None),
    "agents": (int, 100),
    "rounds": (int, 150),
    "runs": (int, 100),
    "seed": (int, 1),
    "eta": (float, 0.1),
    "consensus-threshold": (float, 1.0),
    "gamma": (float, 1.0),
    "lambda": (float, 1.0),
    "rho": (float, 0.5),
    "beta-min": (float, 0.01),
    "xi": (float, 0.8),
    "rumor-rate": (int, 1),
    "stance-norm": (str, "population"),
    "parallelism": (int, None),
    "out": (str, "out"),
    "weight-bins": (int, 50),
    "opinion-bins": (int, 50),
    "include-influencer-pairs": (str, "false"),
    "pairs": (str, "directed"),
    "summary-only": (str, "false"),
}

HELP = {
    "scenario": "influencer preset, or 'custom' with --influencers",
    "influencers": "comma-separated static influencer opinions in [-1, 1]",
    "agents": "population size N including influencers",
    "rounds": "rounds per run",
    "runs": "Monte-Carlo runs",
    "seed": "master seed",
    "eta": "homophily rate",
    "consensus-threshold": "opinion distance O below which weights grow",
    "gamma": "silence sensitivity",
    "lambda": "opinion shift per decision",
    "rho": "opinion decay in (0, 1)",
    "beta-min": "floor on the decision probability",
    "xi": "interest-loss scale",
    "rumor-rate": "rumors per influencer per round",
    "stance-norm": "mean-stance normaliser: population or discussers",
    "parallelism": "worker processes (default: CPU count)",
    "out": "output directory",
    "weight-bins": "bins of the weight histogram",
    "opinion-bins": "bins of the opinion histogram",
    "include-influencer-pairs": "count influencer pairs in the correlation",
    "pairs": "directed or undirected pairs for the correlation",
    "summary-only": "skip per-run files",
}

PARAM_FIELDS = {
    "lambda": "lam", "rho": "rho", "eta": "eta", "consensus-threshold": "threshold",
    "gamma": "silence", "beta-min": "beta_min", "xi": "xi", "stance-norm": "stance_norm",
}

SWEEP_PARAMS = {"eta": "eta", "O": "consensus-threshold",
                "consensus-threshold": "consensus-threshold",
                "Gamma": "gamma", "gamma": "gamma", "scenario": "scenario"}


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class Settings:
    config: RunConfig
    parallelism: int
    out: Path
    weight_bins: int
    opinion_bins: int
    include_influencer_pairs: bool
    directed: bool
    summary_only: bool


def read_config_file(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError([f"{path}:{lineno}: expected key=value, got {raw.strip()!r}"])
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return values


def resolve(raw: dict) -> Settings:
    """Turn merged string/typed settings into validated objects, collecting every error."""
    errs = [f"unknown setting {k!r}" for k in raw if k not in SETTINGS]
    vals = {}
    for key, (conv, default) in SETTINGS.items():
        v = raw.get(key, default)
        if v is None:
            vals[key] = None
            continue
        try:
            vals[key] = conv(v)
        except (TypeError, ValueError):
            errs.append(f"{key}: cannot parse {v!r} as {conv.__name__}")
            vals[key] = default
    for key in ("include-influencer-pairs", "summary-only"):
        try:
            vals[key] = _bool(vals[key])
        except ValueError as exc:
            errs.append(f"{key}: {exc}")
    if vals["pairs"] not in ("directed", "undirected"):
        errs.append(f"pairs must be 'directed' or 'undirected', got {vals['pairs']!r}")
    for key in ("weight-bins", "opinion-bins"):
        if vals[key] < 1:
            errs.append(f"{key} must be >= 1")

    scenario = vals["scenario"]
    influencers: tuple[float, ...] = ()
    custom = vals["influencers"]
    if custom is not None:
        try:
            influencers = tuple(float(x) for x in custom.split(",") if x.strip())
        except ValueError:
            errs.append(f"influencers: cannot parse {custom!r}")
    if scenario in PRESETS:
        if custom is not None and influencers != PRESETS[scenario]:
            errs.append(f"influencers conflict with preset {scenario}; use --scenario custom")
        influencers = PRESETS[scenario]
    elif scenario == CUSTOM:
        if custom is None:
            errs.append("scenario custom requires --influencers")
    else:
        errs.append(f"unknown scenario {scenario!r}; choose from "
                    f"{', '.join([*PRESETS, CUSTOM])}")

    pvals = {field: vals[key] for key, field in PARAM_FIELDS.items()}
    perrs = params_violations(**pvals)
    errs.extend(perrs)
    params = ModelParams(**pvals) if not perrs else ModelParams()

    cfg = RunConfig(
        n_agents=vals["agents"], rounds=vals["rounds"], runs=vals["runs"],
        influencers=influencers, master_seed=vals["seed"], params=params,
        rumor_rate=vals["rumor-rate"], scenario=scenario,
    )
    errs.extend(config_violations(cfg))
    par = vals["parallelism"] if vals["parallelism"] is not None else (os.cpu_count() or 1)
    if par < 1:
        errs.append(f"parallelism must be >= 1, got {par}")
    if errs:
        raise ConfigError(errs)
    return Settings(cfg, par, Path(vals["out"]), vals["weight-bins"], vals["opinion-bins"],
                    vals["include-influencer-pairs"], vals["pairs"] == "directed",
                    vals["summary-only"])


def _run_one(cfg: RunConfig, run_index: int):
    result = run_simulation(cfg, run_index)
    return list(output.timeseries_rows(result)), FinalState.of(result)


def execute(cfg: RunConfig, parallelism: int):
    """All runs of ``cfg`` as (timeseries rows, final state), in run-index order."""
    indices = range(cfg.runs)
    if parallelism <= 1 or cfg.runs == 1:
        return [_run_one(cfg, i) for i in indices]
    with ProcessPoolExecutor(max_workers=min(parallelism, cfg.runs)) as pool:
        return list(pool.map(_run_one, repeat(cfg), indices))


def tag_for(cfg: RunConfig) -> str:
    ops = ",".join(repr(float(x)) for x in cfg.influencers)
    return (f"config_hash={cfg.config_hash()} master_seed={cfg.master_seed} "
            f"scenario={cfg.scenario} influencers={ops}")


SUMMARY_COLUMNS = (
    "runs", "pooled_r", "mean_run_r", "std_run_r", "missing_run_r", "opinion_mean",
    "opinion_variance", "opinion_skewness", "mean_abs_opinion", "mean_weight",
)


def summary_row(s: EnsembleSummary):
    return tuple(getattr(s, c) for c in SUMMARY_COLUMNS)


def write_meta(out_dir: Path, cfg: RunConfig, settings: Settings, command: str,
               extra: str = "") -> None:
    text = (
        f"tool=shimr {__version__}\n"
        f"command={command}\n"
        f"config_hash={cfg.config_hash()}\n"
        f"master_seed={cfg.master_seed}\n"
        f"{cfg.canonical()}\n"
        f"pairs={'directed' if settings.directed else 'undirected'}\n"
        f"include-influencer-pairs={str(settings.include_influencer_pairs).lower()}\n"
        f"weight-bins={settings.weight_bins}\n"
        f"opinion-bins={settings.opinion_bins}\n"
        "rng=splitmix64 counter streams; run_seed=mix(master ^ mix((run+1)*0x9E3779B97F4A7C15))\n"
        f"{extra}"
    )
    output.atomic_write(out_dir / "meta.txt", text)


def write_ensemble(out_dir: Path, cfg: RunConfig, settings: Settings, results,
                   command: str) -> EnsembleSummary:
    tag = tag_for(cfg)
    finals = [final for _, final in results]
    if not settings.summary_only:
        for i, (rows, final) in enumerate(results):
            output.write_csv(out_dir / f"timeseries_run{i}.csv", tag,
                             output.TIMESERIES_COLUMNS, rows)
            output.write_final_state(out_dir, i, tag, final)

    inc, directed = settings.include_influencer_pairs, settings.directed
    summary = pooled_correlation(finals, include_influencers=inc, directed=directed)
    hw = build_histogram(pooled_weights(finals, inc, directed), 0.0, 1.0, settings.weight_bins)
    ho = build_histogram(pooled_opinions(finals, inc), -1.0, 1.0, settings.opinion_bins)
    output.write_histogram(out_dir / "hist_weights.csv", tag, hw)
    output.write_histogram(out_dir / "hist_opinions.csv", tag, ho)
    output.write_csv(out_dir / "summary.csv", tag, SUMMARY_COLUMNS, [summary_row(summary)])
    output.write_csv(out_dir / "run_correlations.csv", tag, ("run", "r"),
                     enumerate(summary.run_r))
    write_meta(out_dir, cfg, settings, command)
    return summary


def cmd_run(settings: Settings) -> int:
    cfg = settings.config.replace(runs=1)
    results = [_run_one(cfg, 0)]
    s = write_ensemble(settings.out, cfg, settings, results, "run")
    print(f"run done: r={output.fmt(s.pooled_r) or 'missing'} "
          f"influencers={list(cfg.influencers)} out={settings.out}")
    return EXIT_OK


def cmd_montecarlo(settings: Settings) -> int:
    cfg = settings.config
    results = execute(cfg, settings.parallelism)
    s = write_ensemble(settings.out, cfg, settings, results, "montecarlo")
    print(f"montecarlo done: runs={cfg.runs} pooled_r={output.fmt(s.pooled_r) or 'missing'} "
          f"mean_run_r={output.fmt(s.mean_run_r) or 'missing'} out={settings.out}")
    return EXIT_OK


def sweep_configs(raw: dict, param: str, values: list[str]):
    """(label, Settings) for each sweep value; raises ConfigError on any bad value."""
    if param not in SWEEP_PARAMS:
        raise ConfigError([f"unknown sweep parameter {param!r}; choose from "
                           f"{', '.join(sorted(set(SWEEP_PARAMS)))}"])
    key = SWEEP_PARAMS[param]
    out, errs = [], []
    for value in values:
        merged = dict(raw)
        merged[key] = value
        if key == "scenario":
            merged.pop("influencers", None)
        try:
            out.append((f"{key}={value}", resolve(merged)))
        except ConfigError as exc:
            errs.extend(f"{key}={value}: {e}" for e in exc.violations)
    if errs:
        raise ConfigError(errs)
    return key, out


SWEEP_COLUMNS = ("parameter", "value", *SUMMARY_COLUMNS)


def cmd_sweep(raw: dict, param: str, values: list[str]) -> int:
    key, points = sweep_configs(raw, param, values)
    base = resolve(raw)
    rows = []
    for (label, settings), value in zip(points, values):
        settings.out = base.out / label
        results = execute(settings.config, settings.parallelism)
        s = write_ensemble(settings.out, settings.config, settings, results, f"sweep {label}")
        rows.append((key, value, *summary_row(s)))
        print(f"{label}: pooled_r={output.fmt(s.pooled_r) or 'missing'}")
    base_cfg = base.config
    output.write_csv(base.out / "sweep.csv", tag_for(base_cfg), SWEEP_COLUMNS, rows)
    write_meta(base.out, base_cfg, base, f"sweep {key}",
               extra=f"sweep={key}:{','.join(values)}\n")
    return EXIT_OK


def cmd_scenarios() -> int:
    for name, ops in PRESETS.items():
        print(f"{name}: influencers={list(ops)}")
    print(f"{CUSTOM}: influencers from --influencers")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value settings file")
    for key, (conv, _) in SETTINGS.items():
        common.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None,
                            type=str, metavar=key.upper().replace("-", "_"),
                            help=HELP[key] if SETTINGS[key][1] is None else f"{HELP[key]} [{SETTINGS[key][1]}]")

    parser = argparse.ArgumentParser(prog="shimr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one simulation run")
    sub.add_parser("montecarlo", parents=[common], help="ensemble of independent runs")
    sw = sub.add_parser("sweep", parents=[common], help="one ensemble per parameter value")
    sw.add_argument("--param", required=True,
                    help="eta, consensus-threshold (O), gamma (Gamma) or scenario")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sub.add_parser("scenarios", help="list influencer presets")
    return parser


def gather(args) -> dict:
    raw = {}
    if args.config:
        raw.update(read_config_file(args.config))
    for key in SETTINGS:
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            raw[key] = v
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "scenarios":
        return cmd_scenarios()
    try:
        raw = gather(args)
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            return cmd_sweep(raw, args.param, values)
        settings = resolve(raw)
        if args.command == "run":
            return cmd_run(settings)
        return cmd_montecarlo(settings)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
