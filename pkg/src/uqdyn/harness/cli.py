"""Command-line interface of the experiment harness.

Subcommands:
    run <config.json> [--out DIR] [--seed N] [--jobs K]
    validate-config <path>
    report <artifact-dir>

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..dynmodels import IntegrationBlowupError
from .config import ConfigError, load_config
from .runner import NumericalFailure, run_experiment, verify_artifacts

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="uqdyn",
        description="Surrogate-modeling experiment harness for dynamical systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("config", help="path to the configuration file")
    run_p.add_argument("--out", help="artifact directory (overrides output_dir)")
    run_p.add_argument("--seed", type=int, help="override the configured seed")
    run_p.add_argument("--jobs", type=int, help="worker count for per-trace work")

    val_p = sub.add_parser("validate-config", help="check a configuration file")
    val_p.add_argument("config", help="path to the configuration file")

    rep_p = sub.add_parser("report", help="summarize and verify a run directory")
    rep_p.add_argument("artifacts", help="artifact directory of a finished run")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            config = load_config(args.config)
            print(f"configuration ok: experiment={config['experiment']} "
                  f"seed={config['seed']}")
            return EXIT_OK
        if args.command == "run":
            try:
                directory, manifest = run_experiment(
                    args.config, out_dir=args.out, seed=args.seed, jobs=args.jobs)
            except (NumericalFailure, IntegrationBlowupError) as err:
                print(f"numerical failure: {err}", file=sys.stderr)
                return EXIT_NUMERICAL
            print(f"artifacts written to {directory}")
            for key, value in sorted(manifest["summary"].items()):
                print(f"  {key}: {value}")
            return EXIT_OK
        if args.command == "report":
            try:
                manifest, problems = verify_artifacts(args.artifacts)
            except (OSError, json.JSONDecodeError) as err:
                print(f"cannot read manifest: {err}", file=sys.stderr)
                return EXIT_CONFIG
            print(f"experiment: {manifest['experiment']}")
            print(f"seed: {manifest['seed']}")
            print(f"config hash: {manifest['config_hash']}")
            print(f"files: {len(manifest['files'])}")
            for key, value in sorted(manifest["summary"].items()):
                print(f"  {key}: {value}")
            if problems:
                for p in problems:
                    print(f"INTEGRITY ERROR: {p}", file=sys.stderr)
                return EXIT_NUMERICAL
            print("integrity: all checksums match")
            return EXIT_OK
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
