"""Command-line front end.

    flashtrace run      --config exp.ini --out results/
    flashtrace stats    --config exp.ini
    flashtrace plotdata --config exp.ini --out results/
    flashtrace overhead --config exp.ini --runs 5

Without --config a built-in default spec runs Postmark on a 400-block
partition of the default chip.  Exit codes: 0 success, 1 configuration
problem, 2 scenario runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import ConfigError, ScenarioSpec, default_spec, load_scenario_spec
from .ffs import FfsError
from .nand import FlashError
from .runner import (compute_stats, execute_scenario, overhead_harness,
                     run_scenario, write_outputs, write_plot_data)
from .analysis import render_stats

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="scenario config file (INI); omit for the "
                             "built-in default scenario")
    parser.add_argument("--partition", metavar="ID",
                        help="partition label or index the monitor traces "
                             "(default: whole chip or config value)")
    parser.add_argument("--log-size", type=int, metavar="N",
                        help="temporal log capacity in events")
    parser.add_argument("--no-tasknames", action="store_true",
                        help="do not record task names in the log")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="workload RNG seed override")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flashtrace",
        description="Simulated raw-NAND storage stack with an attachable "
                    "flash operation monitor.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario and write the "
                                     "spatial view, temporal log, and stats")
    stats = sub.add_parser("stats", help="run the scenario and print stats")
    plot = sub.add_parser("plotdata", help="run the scenario and write "
                                           "per-kind plot data files")
    overhead = sub.add_parser("overhead", help="measure monitor CPU overhead")
    overhead.add_argument("--runs", type=int, default=5, metavar="N",
                          help="paired runs per arm (default 5)")
    for command in (run, stats, plot, overhead):
        _add_common_flags(command)
    return parser


def _spec_from_args(args: argparse.Namespace) -> ScenarioSpec:
    spec = load_scenario_spec(args.config) if args.config else default_spec()
    if args.partition is not None:
        label = args.partition
        if label.isdigit():
            index = int(label)
            labels = spec.partition_labels()
            if not 0 <= index < len(labels):
                raise ConfigError(f"no partition with index {index}")
            label = labels[index]
        elif label not in spec.partition_labels():
            raise ConfigError(f"no partition labeled {label!r}")
        spec.traced_partition = label
    if args.log_size is not None:
        if args.log_size < 1:
            raise ConfigError("--log-size must be >= 1")
        spec.log_capacity = args.log_size
    if args.no_tasknames:
        spec.record_task_names = False
    if args.seed is not None:
        spec.params["rng_seed"] = args.seed
    spec.out_dir = args.out
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            status = run_scenario(spec)
            if status == 0:
                print(f"wrote spatial.txt, temporal.log, stats.txt "
                      f"to {spec.out_dir}")
            return status
        if args.command == "stats":
            result = execute_scenario(spec)
            print(render_stats(compute_stats(result.monitor)), end="")
            return EXIT_OK
        if args.command == "plotdata":
            result = execute_scenario(spec)
            names = write_plot_data(spec, result)
            print(f"wrote {', '.join(names)} to {spec.out_dir}")
            return EXIT_OK
        if args.command == "overhead":
            if args.runs < 1:
                print("config error: --runs must be >= 1", file=sys.stderr)
                return EXIT_CONFIG
            percent = overhead_harness(spec, runs=args.runs)
            print(f"monitor overhead: {percent:+.2f}% host CPU "
                  f"({args.runs} paired runs)")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlashError, FfsError, OSError) as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
