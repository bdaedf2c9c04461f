"""Bisection over exported problem files and the threshold CSV report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .solver import DEFAULT_TOLERANCE, SolveResult, solve_file


@dataclass
class BisectionOutcome:
    eta_star_upper: float
    eta_lo: float
    eta_hi: float
    trace: list[SolveResult] = field(default_factory=list)
    flagged: str | None = None  # set for non-monotone or incomplete walks
    inconclusive_probes: int = 0  # gray-zone solves; walked upward, bound stays valid

    def to_dict(self) -> dict:
        return {
            "eta_star_upper": self.eta_star_upper,
            "final_interval": [self.eta_lo, self.eta_hi],
            "flagged": self.flagged,
            "inconclusive_probes": self.inconclusive_probes,
            "trace": [r.to_dict() for r in self.trace],
        }


def load_plan(plan_path: str | Path) -> dict:
    plan = json.loads(Path(plan_path).read_text())
    for key in ("eta_lo", "eta_hi", "iterations", "entries"):
        if key not in plan:
            raise ValueError(f"{plan_path}: plan missing {key!r}")
    return plan


def run_bisection(
    plan_path: str | Path,
    tolerance: float = DEFAULT_TOLERANCE,
    solver: str = "scs",
    use_presolve: bool = True,
    solver_eps: float = 2e-6,
    max_iters: int = 30_000,
) -> BisectionOutcome:
    """Walk the midpoint tree; infeasible probes certify and move the walk down.

    Probes whose solve is inconclusive are treated as not-certified (the
    walk moves up), which keeps the returned upper bound valid.  A feasible
    probe above a certified-infeasible one contradicts monotonicity of the
    feasible set in the detection efficiency and flags the whole run.
    """
    plan_path = Path(plan_path)
    plan = load_plan(plan_path)
    base = plan_path.parent
    by_eta = {float(entry["eta"]): entry["file"] for entry in plan["entries"]}

    lo, hi = float(plan["eta_lo"]), float(plan["eta_hi"])
    trace: list[SolveResult] = []
    flagged = None
    inconclusive = 0
    max_feasible = -1.0
    min_infeasible = 2.0
    for _ in range(int(plan["iterations"])):
        mid = 0.5 * (lo + hi)
        match = min(by_eta, key=lambda e: abs(e - mid), default=None)
        if match is None or abs(match - mid) > 1e-9:
            flagged = f"missing probe file for eta={mid}"
            break
        result = solve_file(
            base / by_eta[match],
            tolerance=tolerance,
            solver=solver,
            use_presolve=use_presolve,
            solver_eps=solver_eps,
            max_iters=max_iters,
        )
        trace.append(result)
        if result.status == "infeasible":
            hi = mid
            min_infeasible = min(min_infeasible, mid)
        else:
            # gray-zone probes count as not-certified and move the walk up,
            # which can only loosen (never invalidate) the upper bound
            lo = mid
            if result.status == "feasible":
                max_feasible = max(max_feasible, mid)
            else:
                inconclusive += 1
    if max_feasible > min_infeasible:
        flagged = "inconclusive bisection: non-monotone trace"
    return BisectionOutcome(
        eta_star_upper=hi,
        eta_lo=lo,
        eta_hi=hi,
        trace=trace,
        flagged=flagged,
        inconclusive_probes=inconclusive,
    )


CSV_COLUMNS = ["v", "eta_star_upper", "method", "level", "solver", "tolerance", "plan_file"]


def bisection_csv(rows: list[dict], metadata: dict | None = None) -> str:
    """Rows in the same schema the exporting tool uses for its eta-scan CSV."""
    buf = io.StringIO()
    for key, value in sorted((metadata or {}).items()):
        buf.write(f"# {key}={value}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def run_plan_to_row(
    plan_path: str | Path,
    tolerance: float = DEFAULT_TOLERANCE,
    solver: str = "scs",
    use_presolve: bool = True,
    solver_eps: float = 2e-6,
    max_iters: int = 30_000,
) -> tuple[dict, BisectionOutcome]:
    plan = load_plan(plan_path)
    outcome = run_bisection(
        plan_path,
        tolerance=tolerance,
        solver=solver,
        use_presolve=use_presolve,
        solver_eps=solver_eps,
        max_iters=max_iters,
    )
    row = {
        "v": plan.get("visibility"),
        "eta_star_upper": outcome.eta_star_upper,
        "method": "npa-bisection" + ("" if outcome.flagged is None else " (flagged)"),
        "level": plan.get("level"),
        "solver": solver,
        "tolerance": tolerance,
        "plan_file": Path(plan_path).name,
    }
    return row, outcome
