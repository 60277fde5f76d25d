"""Command line entry point: ``capa run <sweep> --config cfg.json --out results.csv``."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .errors import DomainError
from .experiments import SWEEPS, ExperimentConfig, run_experiment, structural_checks, write_outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capa", description="Aperture beamforming experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep and write CSV/JSON results")
    run.add_argument("sweep", choices=SWEEPS)
    run.add_argument("--config", required=True, help="JSON file with ExperimentConfig fields")
    run.add_argument("--out", required=True, help="raw CSV path; summary and metadata go beside it")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--trials", type=int, help="override the Monte Carlo trial count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        data["sweep"] = args.sweep
        data["output"] = args.out
        if args.seed is not None:
            data["seed"] = args.seed
        if args.trials is not None:
            data["trials"] = args.trials
        config = ExperimentConfig.from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        print(f"capa: invalid configuration: {exc}", file=sys.stderr)
        return 2

    start = time.perf_counter()
    try:
        rows = run_experiment(config)
    except DomainError as exc:
        print(f"capa: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start
    checks = structural_checks(config, rows)
    paths = write_outputs(config, rows, args.out, elapsed, checks)

    print(f"{len(rows)} rows -> {paths['raw']} ({elapsed:.1f} s)")
    for name, ok in checks.items():
        print(f"  {'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(checks.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
