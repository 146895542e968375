"""Command-line driver for Monte Carlo campaigns and parameter sweeps.

    hetnet-sim run   --drops 100 --seed 1 --output results/
    hetnet-sim sweep --parameter num_users --values 5,10,15,20,25 \
                     --output sweep_out/

Flags override values from --config (a JSON file with SimConfig fields).
Relative output paths are resolved under $HETNET_OUTPUT_DIR if set.
"""

from __future__ import annotations

import argparse
import os
import sys

from .campaign import SWEEPABLE, run_campaign, sweep
from .config import ALGORITHMS, PLACEMENTS, SimConfig
from .errors import ConfigurationError

OUTPUT_DIR_ENV = "HETNET_OUTPUT_DIR"


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file with configuration defaults")
    parser.add_argument("--users", type=int, dest="num_users")
    parser.add_argument("--femtos", type=int, dest="num_femtos")
    parser.add_argument("--subchannels", type=int, dest="num_subchannels")
    parser.add_argument("--macro-subchannels", type=int,
                        dest="macro_subchannels")
    parser.add_argument("--area-side", type=float, dest="area_side")
    parser.add_argument("--drops", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--algorithm", choices=ALGORITHMS)
    parser.add_argument("--fairness", action=argparse.BooleanOptionalAction,
                        default=None)
    parser.add_argument("--placement", choices=PLACEMENTS)
    parser.add_argument("--random-femtos", action="store_true", default=None)
    parser.add_argument("--output", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetnet-sim",
        description="Uplink resource allocation simulator for two-tier "
                    "heterogeneous networks")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one Monte Carlo campaign")
    _add_config_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run a campaign per swept value")
    _add_config_flags(sweep_p)
    sweep_p.add_argument("--parameter", required=True, choices=SWEEPABLE)
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated integers, e.g. 5,10,15")

    return parser


def config_from_args(args: argparse.Namespace) -> SimConfig:
    if args.config:
        config = SimConfig.from_json_file(args.config)
    else:
        config = SimConfig()
    overrides = {}
    for name in ("num_users", "num_femtos", "num_subchannels",
                 "macro_subchannels", "area_side", "drops", "seed",
                 "algorithm", "fairness", "placement", "random_femtos",
                 "output"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    config = config.with_overrides(**overrides)
    base_dir = os.environ.get(OUTPUT_DIR_ENV)
    if config.output and base_dir and not os.path.isabs(config.output):
        config = config.with_overrides(
            output=os.path.join(base_dir, config.output))
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        if args.command == "run":
            out = run_campaign(config)
            print(f"drops={config.drops} "
                  f"mean_sum_rate={out.report.mean_sum_rate:.4f} bps/Hz "
                  f"outage={out.report.outage:.3f}")
        else:
            try:
                values = [int(v) for v in args.values.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigurationError(f"bad --values: {exc}") from exc
            outputs = sweep(config, args.parameter, values)
            for value, out in zip(values, outputs):
                print(f"{args.parameter}={value} "
                      f"mean_sum_rate={out.report.mean_sum_rate:.4f} "
                      f"stderr={out.report.stderr_sum_rate:.4f}")
        if config.output:
            print(f"results written to {config.output}")
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
