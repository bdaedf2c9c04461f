"""Bridge command line: solve single files or execute bisection plans."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bisection import bisection_csv, run_plan_to_row
from .solver import DEFAULT_TOLERANCE, solve_file


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="routed-bell-bridge", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="classify feasibility of one .dat-s file")
    p_solve.add_argument("file")
    p_solve.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p_solve.add_argument("--solver", default="scs")
    p_solve.add_argument("--no-presolve", action="store_true")
    p_solve.add_argument("--solver-eps", type=float, default=2e-6)

    p_bisect = sub.add_parser("bisect", help="run bisection plans and emit the threshold CSV")
    p_bisect.add_argument("plans", nargs="+", help="plan JSON files")
    p_bisect.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p_bisect.add_argument("--solver", default="scs")
    p_bisect.add_argument("--no-presolve", action="store_true")
    p_bisect.add_argument("--solver-eps", type=float, default=2e-6)
    p_bisect.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p_bisect.add_argument("--trace", default=None, help="optional JSON trace output path")

    args = parser.parse_args(argv)
    if args.command == "solve":
        result = solve_file(
            args.file,
            tolerance=args.tolerance,
            solver=args.solver,
            use_presolve=not args.no_presolve,
            solver_eps=args.solver_eps,
        )
        print(json.dumps(result.to_dict(), indent=2))
        return 0 if result.status != "inconclusive" else 2

    rows = []
    traces = {}
    for plan in args.plans:
        row, outcome = run_plan_to_row(
            plan,
            tolerance=args.tolerance,
            solver=args.solver,
            use_presolve=not args.no_presolve,
            solver_eps=args.solver_eps,
        )
        rows.append(row)
        traces[Path(plan).name] = outcome.to_dict()
    text = bisection_csv(rows, metadata={"bridge_version": __version__, "solver": args.solver})
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.trace:
        Path(args.trace).write_text(json.dumps(traces, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
