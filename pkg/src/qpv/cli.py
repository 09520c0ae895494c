"""Command line experiment runner.

    qpv run --scenario s.json --experiment pv-attack --trials 100000 \
            --seed 42 --out results.csv --format csv --workers 4

Exit codes: 0 success, 1 an embedded experiment assertion failed,
2 configuration or scenario error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import (
    EXPERIMENT_IDS,
    ExperimentConfig,
    ScenarioError,
    emit_report,
    load_scenario,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a scenario file")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--experiment", required=True, choices=EXPERIMENT_IDS)
    run.add_argument("--trials", type=int, default=1000)
    run.add_argument("--seed", type=int, default=None,
                     help="64-bit seed; falls back to the QPV_SEED environment variable, then 0")
    run.add_argument("--out", default=None, help="output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("QPV_SEED", "0"))

    try:
        with open(args.scenario) as fh:
            raw = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: scenario is not valid JSON: {exc}", file=sys.stderr)
        return 2

    try:
        scenario = load_scenario(raw)
        cfg = ExperimentConfig(
            scenario=scenario,
            experiment=args.experiment,
            trials=args.trials,
            seed=seed,
            workers=args.workers,
        )
        rows, ok = run_experiment(cfg)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return 2

    report = emit_report(rows, args.format)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(report)
        except OSError as exc:
            print(f"error: cannot write {args.out!r}: {exc}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(report)
    for row in rows:
        status = "pass" if row.ok else "FAIL"
        print(f"[{status}] {row.experiment} {row.params} freq={row.frequency:.6g}", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
