"""Plan execution, decision rule and the threshold CSV."""

import csv
import io
import json

import pytest

from sdp_bridge.bisection import bisection_csv, load_plan, run_bisection, run_plan_to_row

from conftest import export_scan


def test_zero_iterations_returns_hi(tmp_path):
    plan = export_scan(tmp_path, level="1", eta_lo=0.2, eta_hi=0.9, iterations=0)
    outcome = run_bisection(plan)
    assert outcome.eta_star_upper == 0.9
    assert outcome.trace == []


def test_plan_validation(tmp_path):
    bad = tmp_path / "plan.json"
    bad.write_text(json.dumps({"eta_lo": 0.0}))
    with pytest.raises(ValueError, match="missing"):
        load_plan(bad)


def test_missing_probe_file_flagged(tmp_path):
    plan_path = export_scan(tmp_path, level="1", eta_lo=0.2, eta_hi=0.9, iterations=2)
    plan = json.loads(plan_path.read_text())
    plan["entries"] = plan["entries"][:1]  # drop the second-level probes
    clipped = tmp_path / "clipped.json"
    clipped.write_text(json.dumps(plan))
    outcome = run_bisection(clipped)
    assert outcome.flagged and "missing probe" in outcome.flagged


def test_bisection_walks_down_on_infeasible(tmp_path):
    # level 1+AB at v=1 certifies non-joint-measurability well below eta=1,
    # so the walk must move the upper bound strictly below the window top
    plan = export_scan(tmp_path, level="1+AB", eta_lo=0.3, eta_hi=0.98, iterations=4)
    outcome = run_bisection(plan)
    assert outcome.flagged is None
    assert outcome.eta_star_upper < 0.98
    statuses = [r.status for r in outcome.trace]
    assert "infeasible" in statuses
    # monotone: no feasible probe above a certified infeasible one
    etas_feas = []
    etas_inf = []
    lo, hi = 0.3, 0.98
    for r in outcome.trace:
        mid = 0.5 * (lo + hi)
        if r.status == "infeasible":
            etas_inf.append(mid)
            hi = mid
        else:
            etas_feas.append(mid)
            lo = mid
    if etas_feas and etas_inf:
        assert max(etas_feas) < min(etas_inf)


def test_raising_level_never_raises_bound(tmp_path):
    window = dict(eta_lo=0.3, eta_hi=0.98, iterations=3)
    uppers = {}
    for level in ("1", "1+AB"):
        d = tmp_path / level.replace("+", "p")
        plan = export_scan(d, level=level, **window)
        uppers[level] = run_bisection(plan).eta_star_upper
    assert uppers["1+AB"] <= uppers["1"] + 1e-12


def test_csv_schema(tmp_path):
    plan = export_scan(tmp_path, level="1+AB", eta_lo=0.3, eta_hi=0.98, iterations=2)
    row, outcome = run_plan_to_row(plan)
    text = bisection_csv([row], metadata={"solver": "scs"})
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    parsed = list(csv.DictReader(io.StringIO("\n".join(lines))))
    assert list(parsed[0].keys()) == ["v", "eta_star_upper", "method", "level", "solver", "tolerance", "plan_file"]
    assert parsed[0]["level"] == "1+AB"
    assert float(parsed[0]["eta_star_upper"]) == outcome.eta_star_upper
    assert parsed[0]["method"].startswith("npa-bisection")
