"""Command-line front end.

    anctsim run      --config FILE [--seed N] [--set key=value ...] [--out FILE]
                     [--trace-trust [FILE]] [--trace-positions [FILE]]
    anctsim sweep    --vary attackers=0,5,10 --protocols anct,baseline_aodv --seeds 1..10
    anctsim validate --config FILE
    anctsim experiment {attackers,mobility} [--seeds 1..10]

Exit status: 0 on success, 1 on a configuration or usage error, 2 on an
internal error.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .core import ConfigError, Protocol, ScenarioConfig, apply_overrides, load_scenario, validate_config
from .engine import Simulation, Summary


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_seeds(text: str) -> tuple:
    """``"1..10"`` (inclusive) or ``"1,2,7"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = tuple(range(int(lo), int(hi) + 1))
        else:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"bad --seeds value: {text!r}") from None
    if not seeds:
        raise UsageError("--seeds must name at least one seed")
    return seeds


def parse_vary(text: str):
    if "=" not in text:
        raise UsageError("--vary expects name=v1,v2,...")
    name, values = text.split("=", 1)
    name = name.strip()
    if name not in experiments.VARY_FIELDS:
        raise UsageError(f"unknown --vary dimension: {name}")
    cast = int if name == "attackers" else float
    try:
        vals = tuple(cast(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad --vary values: {values!r}") from None
    if not vals:
        raise UsageError("--vary list must be non-empty")
    return name, vals


def parse_protocols(text: str) -> tuple:
    try:
        return tuple(Protocol(p.strip()) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"unknown protocol in {text!r}") from None


def _sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_config(args) -> ScenarioConfig:
    cfg = load_scenario(args.config) if args.config else ScenarioConfig()
    cfg = apply_overrides(cfg, _sets(args.set))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    return validate_config(cfg)


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anctsim", description="Trust-based MANET routing simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def scenario_flags(p):
        p.add_argument("--config", help="scenario file (key = value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")

    p = sub.add_parser("run", help="run one scenario and print its summary row")
    scenario_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--trace-trust", nargs="?", const="trust_trace.csv", metavar="FILE")
    p.add_argument("--trace-positions", nargs="?", const="positions.csv", metavar="FILE")

    p = sub.add_parser("sweep", help="cartesian sweep, one CSV row per run")
    scenario_flags(p)
    p.add_argument("--vary", required=True)
    p.add_argument("--seeds", default="1..10")
    p.add_argument("--protocols", default="anct,baseline_aodv")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    p = sub.add_parser("validate", help="check a scenario file")
    scenario_flags(p)

    p = sub.add_parser("experiment", help="canned delivery-ratio experiments")
    p.add_argument("which", choices=["attackers", "mobility"])
    scenario_flags(p)
    p.add_argument("--seeds", default="1..10")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    return parser


def _cmd_run(args) -> None:
    cfg = build_config(args)
    sim = Simulation(cfg, trace_positions=bool(args.trace_positions))
    sim.run()
    summary = sim.summary()
    _emit(",".join(Summary.CSV_COLUMNS) + "\n" + summary.csv_row() + "\n", args.out)
    if args.trace_trust:
        _emit(sim.trust_trace_csv(), args.trace_trust)
    if args.trace_positions:
        _emit(sim.position_trace_csv(), args.trace_positions)


def _cmd_sweep(args) -> None:
    base = build_config(args)
    name, values = parse_vary(args.vary)
    spec = experiments.SweepSpec(base, name, values, parse_seeds(args.seeds), parse_protocols(args.protocols))
    rows = experiments.run_sweep(spec, args.workers)
    _emit(experiments.rows_csv(rows), args.out)


def _cmd_experiment(args) -> None:
    base = build_config(args)
    seeds = parse_seeds(args.seeds)
    if args.which == "attackers":
        text = experiments.attacker_sweep_experiment(args.workers, base=base, seeds=seeds)
    else:
        text = experiments.mobility_sweep_experiment(args.workers, base=base, seeds=seeds)
    _emit(text, args.out)


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (run, sweep, validate, experiment)")
        if args.command == "validate":
            build_config(args)
            print("ok")
        elif args.command == "run":
            _cmd_run(args)
        elif args.command == "sweep":
            _cmd_sweep(args)
        else:
            _cmd_experiment(args)
    except (ConfigError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
