"""Command line entry point.

    l1linf verify <suite> [--seed N] [--samples N] [--grid N] [--tol name=val]
                          [--out path --format csv|json]
    l1linf table <kind> [params] --out path

Exit status: 0 when every check passes, 1 when a check fails, 2 for invalid
configuration or parameters, 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import InvalidConfig, InvalidParams
from .suites import SUITES, SuiteConfig, checks_for, run_suite
from .tables import TABLE_KINDS, emit_table

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {value!r} is not a number") from None


def _resolutions(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1linf", description="Verification harness and table emitter.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a suite of invariant checks")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--samples", type=int, help="override the sample count of every check")
    v.add_argument("--grid", type=int, help="override the base grid resolution of grid checks")
    v.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                   help="override the tolerance of one check (repeatable)")
    v.add_argument("--out", help="write the report to this path")
    v.add_argument("--format", choices=("csv", "json"), default="csv")
    v.add_argument("--list", action="store_true", help="list the checks of the suite and exit")

    t = sub.add_parser("table", help="emit a CSV table")
    t.add_argument("kind", choices=TABLE_KINDS)
    t.add_argument("--out", required=True)
    t.add_argument("--n", type=int, help="levi_scan: lattice size")
    t.add_argument("--metric", help="dual_norm_table: l1, l2 or linf")
    t.add_argument("--dim", type=int, help="dual_norm_table: fiber dimension")
    t.add_argument("--count", type=int, help="dual_norm_table: number of random points")
    t.add_argument("--seed", type=int, help="dual_norm_table / cr_convergence: seed")
    t.add_argument("--resolutions", type=_resolutions, help="cr_convergence: e.g. 128,256")
    t.add_argument("--probes", type=int, help="cr_convergence: number of probe points")
    return parser


def _verify(args) -> int:
    if args.list:
        for c in checks_for(args.suite):
            print(c.name)
        return EXIT_OK
    cfg = SuiteConfig(args.suite, seed=args.seed, samples=args.samples, grid=args.grid,
                      tolerances=dict(args.tol), output=args.out, format=args.format)
    report = run_suite(cfg)
    print(report.summary())
    for r in report.failures:
        print(f"failed: {r.name} measured {r.measured:.6e}, tolerance {r.tolerance:.6e}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def _table(args) -> int:
    keys = ("n", "metric", "dim", "count", "seed", "resolutions", "probes")
    params = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    text = emit_table(args.kind, params)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write table to {args.out}: {exc.strerror or exc}") from exc
    print(f"wrote {text.count(chr(10)) - 1} rows to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _verify(args) if args.command == "verify" else _table(args)
    except (InvalidConfig, InvalidParams) as exc:
        print(f"l1linf: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"l1linf: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
