"""Command line entry point: ``mmpass run`` and ``mmpass sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import (
    SWEEP_VARS,
    emit_results,
    emit_traces,
    parse_seeds,
    parse_values,
    run_once,
    sweep,
)
from .protocols import PROTOCOLS
from .scenario import ScenarioError, bundled_scenario_path, load_scenario


def resolve_scenario(arg: str) -> Path:
    """A scenario file path, or the name of a bundled scenario such as ``reference``."""
    path = Path(arg)
    if not path.exists() and path.suffix == "" and bundled_scenario_path(arg).is_file():
        return bundled_scenario_path(arg)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmpass", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one protocol on one scenario")
    run.add_argument("--scenario", required=True, help="YAML file or bundled name")
    run.add_argument("--protocol", required=True, choices=PROTOCOLS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)
    run.add_argument("--trace", help="optional per-iteration gbest trace CSV")

    sw = sub.add_parser("sweep", help="sweep P_max or N over protocols and seeds")
    sw.add_argument("--scenario", required=True, help="YAML file or bundled name")
    sw.add_argument("--protocols", required=True, help="comma separated protocol names")
    sw.add_argument("--var", required=True, choices=SWEEP_VARS)
    sw.add_argument("--values", required=True, help="comma separated sweep values")
    sw.add_argument("--seeds", default="0..19", help="range like 0..19 or a comma list")
    sw.add_argument("--out", required=True)
    sw.add_argument("--trace", help="optional per-iteration gbest trace CSV")
    sw.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        scenario = load_scenario(resolve_scenario(args.scenario))
        if args.command == "run":
            records = [run_once(scenario, args.protocol, args.seed)]
        else:
            protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
            bad = [p for p in protocols if p not in PROTOCOLS]
            if bad:
                raise ScenarioError(f"unknown protocol {bad[0]!r}; choose from {', '.join(PROTOCOLS)}")
            values = parse_values(args.values, args.var)
            seeds = parse_seeds(args.seeds)
            records = sweep(scenario, protocols, args.var, values, seeds, workers=args.workers)
        emit_results(records, args.out)
        if args.trace:
            emit_traces(records, args.trace)
    except (OSError, ValueError) as exc:
        print(f"mmpass: error: {exc}", file=sys.stderr)
        return 2

    failed = [r for r in records if r.status != "ok"]
    for rec in failed:
        print(f"mmpass: {rec.protocol} seed={rec.seed} failed: {rec.message}", file=sys.stderr)
    if args.command == "run" and failed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
