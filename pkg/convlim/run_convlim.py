#!/usr/bin/env python3
"""CLI for convlim.

Reads a system description, runs verification suites, exports matrices
and laws, samples flow trajectories, runs tower diagnostics and the
mutation catalogue.

Exit codes: 0 when every check passes, 1 when a check fails (or a mutant
goes undetected), 2 for bad input.
"""
import argparse
import json
import logging
import os
import sys

from .commands import DEFAULT_SEED, EXPORT_KINDS, cmd_export, cmd_sample, cmd_tower, load_context
from .description import SCHEMA_PATH, load_schema
from .mutations import detection_table, run_mutations
from .suites import DEFAULT_WORKERS, cmd_verify, format_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


def _default_workers() -> int:
    value = os.environ.get("CONVLIM_WORKERS")
    if value is None:
        return DEFAULT_WORKERS
    try:
        return max(1, int(value))
    except ValueError:
        print(f"[WARN] ignoring CONVLIM_WORKERS={value!r}; using {DEFAULT_WORKERS}", file=sys.stderr)
        return DEFAULT_WORKERS


def _write_json(path: str, payload) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convlim",
        description="convlim - exact convolution systems, projective limits and L2 product systems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run every verification suite
  convlim verify fixtures/fixture_a.json

  # One suite, machine-readable report
  convlim verify fixtures/fixture_b.json --suite ps --json output/report.json

  # Koopman isometry of a multiplication
  convlim export fixtures/fixture_a.json --what koopman --triple 0,1,2 --out output/m.json

  # Sample flow trajectories
  convlim sample fixtures/fixture_b.json --from 0 --to 2 -n 100000 --seed 7 --out output/traj.csv

  # Cylinder tower diagnostics and mutation sensitivity
  convlim tower fixtures/fixture_a.json
  convlim mutate fixtures/fixture_a.json
        """,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log progress at INFO level")
    parser.add_argument("--schema", default=SCHEMA_PATH, help=f"Description schema (default: {SCHEMA_PATH})")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Run verification suites")
    verify.add_argument("file", help="System description (JSON)")
    verify.add_argument("--suite", default="all", help="Suite name, comma list or 'all' (default: all)")
    verify.add_argument("--json", default=None, help="Write the report as JSON to this path")
    verify.add_argument("--workers", type=int, default=_default_workers(),
                        help=f"Concurrent suites (default: CONVLIM_WORKERS or {DEFAULT_WORKERS})")

    export = sub.add_parser("export", help="Export matrices or laws")
    export.add_argument("file", help="System description (JSON)")
    export.add_argument("--what", required=True, choices=EXPORT_KINDS, help="What to export")
    export.add_argument("--triple", default=None, help="r,s,t time labels for koopman")
    export.add_argument("--window", default=None, help="s,t time labels for theta")
    export.add_argument("--out", default=None, help="Output JSON path (default: stdout)")

    sample = sub.add_parser("sample", help="Sample flow trajectories")
    sample.add_argument("file", help="System description (JSON)")
    sample.add_argument("--from", dest="start", required=True, help="Start time label")
    sample.add_argument("--to", dest="end", required=True, help="End time label")
    sample.add_argument("-n", type=int, default=1000, help="Number of threads (default: 1000)")
    sample.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default: {DEFAULT_SEED})")
    sample.add_argument("--out", required=True, help="Trajectory CSV path; summary goes to <out>.summary.json")

    tower = sub.add_parser("tower", help="Cylinder tower diagnostics")
    tower.add_argument("file", help="System description (JSON)")
    tower.add_argument("--json", default=None, help="Write the report as JSON to this path")

    mutate = sub.add_parser("mutate", help="Run the mutation catalogue")
    mutate.add_argument("file", help="System description (JSON)")
    mutate.add_argument("--csv", default=None, help="Write the detection table as CSV to this path")
    return parser


def _run(args) -> int:
    schema = load_schema(args.schema)
    ctx = load_context(args.file, schema)
    source = os.path.basename(args.file)

    if args.command in ("verify", "tower"):
        if args.command == "verify":
            report = cmd_verify(ctx, suite=args.suite, workers=args.workers, source=source)
        else:
            report = cmd_tower(ctx, source=source)
        print(format_report(report))
        if args.json:
            _write_json(args.json, report.model_dump())
            print(f"Report written to: {args.json}")
        return EXIT_OK if report.passed else EXIT_FAILED

    if args.command == "export":
        payload = cmd_export(ctx, args.what, triple=args.triple, window=args.window)
        if args.out:
            _write_json(args.out, payload)
            print(f"[OK] {args.what} written to: {args.out}")
        else:
            print(json.dumps(payload, indent=2))
        return EXIT_OK

    if args.command == "sample":
        directory = os.path.dirname(args.out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        _, summary = cmd_sample(ctx, args.start, args.end, args.n, seed=args.seed, out=args.out)
        print(f"[OK] {summary['n']} threads written to: {args.out}")
        print(f"     window {tuple(summary['window'])}, seed {summary['seed']} ({summary['algorithm']})")
        for outcome, p in summary["exact_law"].items():
            print(f"     X = {outcome}: exact {p}, empirical {summary['empirical'][outcome]:.6f}")
        if summary["composition_checked"] != summary["n"]:
            print(f"[FAIL] only {summary['composition_checked']} rows satisfy the composition law")
            return EXIT_FAILED
        return EXIT_OK

    outcomes = run_mutations(lambda: load_context(args.file, schema))
    table = detection_table(outcomes)
    for o in outcomes:
        if o.equivalent:
            print(f"[WARN] {o.mutant}: skipped (corrupted system is still valid)")
        elif o.skipped:
            print(f"[WARN] {o.mutant}: skipped (system too small)")
        elif o.detected:
            print(f"[OK]   {o.mutant}: {o.failed_check} witness: {o.witness}")
        else:
            print(f"[FAIL] {o.mutant}: not detected by suite {o.suite}")
    ran = table[~table["skipped"]]
    print("-" * 70)
    print(f"{int(ran['detected'].sum())} of {len(ran)} mutants detected, {len(table) - len(ran)} skipped")
    if args.csv:
        table.to_csv(args.csv, index=False)
    return EXIT_OK if bool(ran["detected"].all()) else EXIT_FAILED


def main(argv=None) -> int:
    """CLI entry point.

    Returns:
        Exit code: 0 on success, 1 on failed checks, 2 on bad input.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except (ValueError, OSError) as exc:
        print(f"[FAIL] {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
