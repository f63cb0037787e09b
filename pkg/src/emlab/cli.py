"""Command-line entry point: ``emlab run | reproduce | list-drifts | list-functionals``."""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from . import harness
from .drifts import builtin_names
from .quadrature import functional_names


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emlab", description="Euler-Maruyama convergence experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
    run.add_argument("--seed", type=_u64, help="override the experiment seed")
    run.add_argument("--workers", type=int, help="worker processes (does not change results)")
    run.add_argument("--out", metavar="DIR", help="output directory")

    rep = sub.add_parser("reproduce", help="re-run a results.json and compare")
    rep.add_argument("result", metavar="RESULTS_JSON")
    rep.add_argument("--workers", type=int, default=1)

    sub.add_parser("list-drifts", help="builtin drifts and their regularity class")
    sub.add_parser("list-functionals", help="builtin test functionals")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-drifts":
        for name, regularity in builtin_names().items():
            print(f"{name:12s} {regularity}")
        return 0
    if args.command == "list-functionals":
        for name, doc in functional_names().items():
            print(f"{name:16s} {doc}")
        return 0
    if args.command == "reproduce":
        verdict = harness.reproduce(args.result, workers=args.workers)
        print(json.dumps(verdict, indent=2))
        return harness.EXIT_OK if verdict["verdict"] == "identical" else harness.EXIT_ASSERTION

    try:
        cfg = harness.load_config(args.config, seed=args.seed, workers=args.workers, out=args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_VALIDATION
    outcome = harness.run(cfg)
    for line in outcome.errors:
        print(f"error: {line}", file=sys.stderr)
    if outcome.out_dir is not None:
        print(f"wrote {outcome.out_dir / 'results.json'}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
