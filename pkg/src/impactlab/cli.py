"""Command-line entry point.

Each simulation subcommand reads a sectioned key=value config, checks that
its experiment kind belongs to the subcommand, and runs the replicas into
the output directory.  Exit status is 0 on success, 2 on configuration
errors, and 3 on runtime failures; errors are emitted as a single JSON
line on stderr so callers can parse them.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import parse_config
from .errors import ConfigError, ImpactLabError
from .experiments import ExperimentError, run_experiment
from .reports import REPORT_KINDS, emit_report

SUBCOMMAND_KINDS = {
    "simulate-flow": ("flow",),
    "simulate-book": ("book",),
    "stats": ("stats", "response"),
    "calibrate": ("calibrate",),
    "impact": ("impact-curve",),
    "metaorder": ("surface", "decay"),
    "llob": ("llob",),
    "coimpact": ("coimpact",),
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fail(kind, code, **payload):
    sys.stderr.write(json.dumps({"error": kind, **payload}) + "\n")
    return code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="impactlab",
        description="Order-flow and price-impact simulation toolkit",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config file path")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument(
        "--replicas", type=int, default=None, help="replica count override"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KINDS:
        sub.add_parser(name, parents=[common])
    report = sub.add_parser("report")
    report.add_argument("--kind", required=True, choices=REPORT_KINDS)
    report.add_argument("--out", default="report")
    report.add_argument("inputs", nargs="+", help="replica output CSVs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        try:
            files = emit_report(args.inputs, args.kind, args.out)
        except FileNotFoundError as exc:
            return _fail("missing-input", EXIT_CONFIG, message=str(exc))
        except (ValueError, ImpactLabError) as exc:
            return _fail("runtime", EXIT_RUNTIME, message=str(exc))
        for f in files:
            print(f)
        return EXIT_OK
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        return _fail("config", EXIT_CONFIG, problems=[str(exc)])
    try:
        config = parse_config(text)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, problems=exc.problems)
    allowed = SUBCOMMAND_KINDS[args.command]
    if config.kind not in allowed:
        return _fail(
            "config",
            EXIT_CONFIG,
            problems=[
                f"kind {config.kind!r} does not belong to {args.command!r} "
                f"(expected one of {allowed})"
            ],
        )
    if args.replicas is not None and args.replicas < 1:
        return _fail(
            "config", EXIT_CONFIG, problems=["replica count must be >= 1"]
        )
    try:
        manifest = run_experiment(
            config, args.out, master_seed=args.seed, replicas=args.replicas
        )
    except ExperimentError as exc:
        return _fail(
            "runtime",
            EXIT_RUNTIME,
            message=str(exc),
            replica_errors=exc.manifest["errors"],
        )
    except (ValueError, ImpactLabError) as exc:
        return _fail("runtime", EXIT_RUNTIME, message=str(exc))
    print(json.dumps({"out": args.out, "config_hash": manifest["config_hash"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
