"""Batch command-line front end.

Subcommands expose the library as machine-readable computations: ``score``
(functional values against their thresholds), ``jm-scan`` (exhaustive
certification), ``eta-scan`` (closed-form rows plus SDP export for the
bridge), and ``robust`` (error-budget thresholds).  Exit codes: 0 success or
verified, 1 usage, 2 computation error, 3 scan finished but not verified.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .certifier import exhaustive_scan
from .inequalities import (
    CHSH_GRAM_OFFDIAG,
    TSIRELSON_WIN,
    chsh_n_score,
    critical_efficiency_closed_form,
    penalized_score,
)
from .npa import bisection_plan, export_problem
from .robustness import RobustnessInput, delta_bound, robust_eta_star
from .strategies import STRATEGY_KINDS, build_strategy, correlation

USAGE_EXIT = 1
COMPUTE_EXIT = 2
UNVERIFIED_EXIT = 3

_FAMILY_OF_KIND = {"rbb84": "bb84", "rchsh": "chsh"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _default_q(family: str, n: int) -> float:
    if family == "bb84":
        return 1.0 / math.sqrt(2.0)
    return TSIRELSON_WIN ** (n - 1) * CHSH_GRAM_OFFDIAG


def _workers(args: argparse.Namespace) -> int:
    env = os.environ.get("ROUTED_BELL_THREADS")
    if env:
        return max(1, int(env))
    if args.workers == "max":
        return os.cpu_count() or 1
    return max(1, int(args.workers))


def _metadata(args: argparse.Namespace) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"version": __version__, "config": echo}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows: list[dict], columns: list[str], metadata: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# routed-bell {metadata['version']}\n")
    for key, value in sorted(metadata["config"].items()):
        buf.write(f"# {key}={value}\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def cmd_score(args: argparse.Namespace) -> int:
    family = _FAMILY_OF_KIND.get(args.strategy)
    if family is None:
        raise SystemExit(
            f"score: no closed-form functional family for strategy {args.strategy!r}"
        )
    q = _default_q(family, args.n) if args.q is None else args.q
    strategy = build_strategy(args.strategy, args.n, eta=args.eta, visibility=args.v)
    corr = correlation(strategy)
    score = penalized_score(corr, family, q)
    certified = bool(
        score.window_proven and score.value > score.jm_threshold + 1e-9
    )
    rows = [
        {
            "functional": "chsh_product_b0",
            "value": chsh_n_score(corr, leg="b0"),
            "ideal": TSIRELSON_WIN**args.n,
            "jm_threshold": None,
            "certified": None,
        },
        {
            "functional": f"penalized_{family}",
            "value": score.value,
            "ideal": score.ideal_value,
            "jm_threshold": score.jm_threshold,
            "certified": certified,
        },
    ]
    meta = _metadata(args)
    meta["q"] = q
    if args.format == "json":
        _emit(json.dumps({"metadata": meta, "rows": rows}, indent=2) + "\n", args.out)
    else:
        _emit(_rows_to_csv(rows, ["functional", "value", "ideal", "jm_threshold", "certified"], meta), args.out)
    return 0


def cmd_jm_scan(args: argparse.Namespace) -> int:
    if args.progress:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    q = _default_q(args.family, args.n) if args.q is None else args.q
    report = exhaustive_scan(
        args.family,
        args.n,
        q,
        workers=_workers(args),
        prune=args.prune,
        progress=args.progress,
    )
    payload = {"metadata": _metadata(args), "report": report.to_dict()}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0 if report.verified else UNVERIFIED_EXIT


def _parse_grid(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be start:stop:count")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError("grid count must be positive")
    if count == 1:
        return [start]
    step = (stop - start) / (count - 1)
    return [start + i * step for i in range(count)]


def cmd_eta_scan(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    vs = _parse_grid(args.v_grid) if args.v_grid else [float(v) for v in args.v]
    if not vs:
        raise SystemExit("eta-scan: provide --v-grid or at least one --v")
    family = _FAMILY_OF_KIND.get(args.strategy)
    rows = []
    for v in vs:
        plan = bisection_plan(
            args.strategy, args.n, v, args.level,
            eta_lo=args.eta_lo, eta_hi=args.eta_hi, iterations=args.iterations,
        )
        for eta, name in plan:
            export_problem(
                args.strategy, args.n, v, eta, args.level, out_dir,
                file_name=name, commute_b1=not args.no_commute_b1,
            )
        plan_path = out_dir / (
            f"plan_{args.strategy}_n{args.n}_v{v:.6f}_lvl{args.level.replace('+', 'p')}.json"
        )
        plan_payload = {
            "strategy": args.strategy,
            "n_copies": args.n,
            "visibility": v,
            "level": args.level,
            "eta_lo": args.eta_lo,
            "eta_hi": args.eta_hi,
            "iterations": args.iterations,
            "decision_rule": "infeasible => threshold below probe => search lower",
            "entries": [{"eta": eta, "file": name} for eta, name in plan],
        }
        plan_path.write_text(json.dumps(plan_payload, indent=2) + "\n", encoding="ascii")
        closed_form = None
        method = "sdp-export"
        if family is not None and abs(v - 1.0) <= 1e-12:
            q = _default_q(family, args.n)
            closed_form = critical_efficiency_closed_form(family, args.n, q)
            method = "closed-form"
        rows.append(
            {
                "v": v,
                "eta_star_upper": closed_form,
                "method": method,
                "level": args.level,
                "solver": None,
                "tolerance": None,
                "plan_file": plan_path.name,
            }
        )
    text = _rows_to_csv(
        rows,
        ["v", "eta_star_upper", "method", "level", "solver", "tolerance", "plan_file"],
        _metadata(args),
    )
    (out_dir / "eta_scan.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_robust(args: argparse.Namespace) -> int:
    base = RobustnessInput(n_copies=args.n, epsilon=args.epsilon, f_value=args.f, linear_translation=False)
    delta = delta_bound(base) if args.delta is None else args.delta
    payload: dict = {
        "metadata": _metadata(args),
        "n_copies": args.n,
        "f_value": args.f,
        "f_provenance": "user-supplied self-testing error",
        "epsilon": args.epsilon,
        "delta": delta,
    }
    try:
        q, eta_plain = robust_eta_star(base, delta=delta)
    except ValueError as exc:
        _emit(json.dumps({"error": str(exc), "delta": delta}, indent=2) + "\n", args.out)
        return COMPUTE_EXIT
    payload["q"] = q
    payload["eta_star_detection_only"] = eta_plain
    try:
        _, eta_linear = robust_eta_star(
            RobustnessInput(n_copies=args.n, epsilon=args.epsilon, f_value=args.f, linear_translation=True),
            delta=delta,
        )
        payload["eta_star_linear_translation"] = eta_linear
    except ValueError as exc:
        payload["eta_star_linear_translation"] = None
        payload["linear_translation_error"] = str(exc)
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="routed-bell", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def _common_strategy(p: _Parser) -> None:
        p.add_argument("--strategy", choices=STRATEGY_KINDS, required=True)
        p.add_argument("--n", type=int, required=True, help="number of parallel copies")

    p_score = sub.add_parser("score", help="functional values, thresholds, certification flags")
    _common_strategy(p_score)
    p_score.add_argument("--eta", type=float, required=True)
    p_score.add_argument("--v", type=float, default=1.0)
    p_score.add_argument("--q", type=float, default=None)
    p_score.add_argument("--format", choices=("csv", "json"), default="csv")
    p_score.add_argument("--out", default=None)
    p_score.set_defaults(func=cmd_score)

    p_scan = sub.add_parser("jm-scan", help="exhaustive pattern scan certification")
    p_scan.add_argument("--family", choices=("bb84", "chsh"), required=True)
    p_scan.add_argument("--n", type=int, required=True)
    p_scan.add_argument("--q", type=float, default=None)
    p_scan.add_argument("--workers", default="1", help="worker count or 'max'")
    p_scan.add_argument("--prune", action="store_true")
    p_scan.add_argument("--progress", action="store_true")
    p_scan.add_argument("--out", default=None)
    p_scan.set_defaults(func=cmd_jm_scan)

    p_eta = sub.add_parser("eta-scan", help="closed-form rows plus SDP export over a visibility grid")
    _common_strategy(p_eta)
    p_eta.add_argument("--level", default="1")
    p_eta.add_argument("--v-grid", default=None, help="start:stop:count")
    p_eta.add_argument("--v", action="append", default=[])
    p_eta.add_argument("--eta-lo", type=float, default=0.0)
    p_eta.add_argument("--eta-hi", type=float, default=1.0)
    p_eta.add_argument("--iterations", type=int, default=1)
    p_eta.add_argument(
        "--no-commute-b1",
        action="store_true",
        help="drop the far-device commutation constraints (honest-model sanity problems)",
    )
    p_eta.add_argument("--out", required=True, help="output directory")
    p_eta.set_defaults(func=cmd_eta_scan)

    p_rob = sub.add_parser("robust", help="error-budget critical efficiencies")
    p_rob.add_argument("--n", type=int, required=True)
    p_rob.add_argument("--f", type=float, required=True, help="self-testing error f(N, epsilon)")
    p_rob.add_argument("--epsilon", type=float, default=0.0)
    p_rob.add_argument("--delta", type=float, default=None, help="override the computed delta bound")
    p_rob.add_argument("--out", default=None)
    p_rob.set_defaults(func=cmd_robust)
    return parser


def _validate(args: argparse.Namespace, parser: _Parser) -> None:
    checks = []
    if hasattr(args, "eta"):
        checks.append(("--eta", args.eta, 0.0, 1.0))
    if hasattr(args, "v") and isinstance(getattr(args, "v"), float):
        checks.append(("--v", args.v, 0.0, 1.0))
    for name, value, lo, hi in checks:
        if not lo <= value <= hi:
            parser.error(f"{name} must lie in [{lo}, {hi}]")
    if getattr(args, "q", None) is not None and args.q < 0:
        parser.error("--q must be nonnegative")
    if getattr(args, "n", 1) < 1:
        parser.error("--n must be at least 1")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"routed-bell: {exc}\n")
        return COMPUTE_EXIT


if __name__ == "__main__":
    sys.exit(main())
