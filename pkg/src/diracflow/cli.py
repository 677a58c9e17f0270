"""Command line driver: one subcommand per experiment kind.

    diracflow index-check --config configs/index_alpha0.ini --out out/
    diracflow eta --config configs/eta.ini --out out/ --seed 3 --no-figures

Outputs: report.json, CSV side tables and PNG figures under --out.  Any
module error is written to error.json and reflected in the exit status.
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENT_KINDS, load_config
from .errors import DiracflowError
from .experiments import run_experiment
from .reporting import write_error


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracflow",
        description="numerical index theory on evolving circle Hamiltonian families",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="INI experiment file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for studies")
        p.add_argument("--figures", dest="figures", action="store_true", default=True)
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       help="skip PNG rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_dict = None
    try:
        config = load_config(args.config, kind=args.kind, seed=args.seed)
        config_dict = config.as_dict()
        report = run_experiment(config, args.out, jobs=args.jobs, figures=args.figures)
    except DiracflowError as exc:
        write_error(exc, args.out, config_dict)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = 0 if report.get("pass", False) else 1
    for entry in report.get("criteria", []):
        verdict = "pass" if entry.get("passed") else "FAIL"
        print(f"[{verdict}] {entry['name']}: value={entry['value']!r} "
              f"oracle={entry['oracle']!r} tol={entry['tolerance']!r}")
    print(f"report written under {args.out} (exit {status})")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
