"""Presolve and feasibility classification."""

import numpy as np

from sdp_bridge.sdpa import parse_sdpa_file
from sdp_bridge.solver import presolve, solve_file

from conftest import export_scan


def _write(tmp_path, text, name="p.dat-s"):
    path = tmp_path / name
    path.write_text(text)
    return path


FEASIBLE_2X2 = """\
3
1
2
1.0 0.0 0.8
1 1 1 1 1.0
2 1 1 2 0.5
2 1 2 2 -1.0
3 1 1 2 0.5
3 1 2 2 1.0
"""
# rows: Y00 = 1; Y01 - Y11 = 0; Y01 + Y11 = 0.8  =>  Y = [[1, .4], [.4, .4]]


def test_presolve_merges_and_pins(tmp_path):
    prob = parse_sdpa_file(_write(tmp_path, FEASIBLE_2X2))
    red = presolve(prob)
    assert red.merged_rows == 1
    assert red.pinned_rows == 1
    assert len(red.rows) == 1  # only the sum row survives
    assert red.contradiction == 0.0


def test_feasible_2x2_all_backends(tmp_path):
    path = _write(tmp_path, FEASIBLE_2X2)
    for kwargs in (
        {"solver": "scs"},
        {"solver": "scs", "use_presolve": False},
        {"solver": "clarabel"},
    ):
        result = solve_file(path, **kwargs)
        assert result.status == "feasible", (kwargs, result.message)


INFEASIBLE_2X2 = """\
2
1
2
1.0 -0.5
1 1 1 1 1.0
2 1 2 2 1.0
"""
# Y00 = 1, Y11 = -0.5: a negative diagonal cannot be PSD


def test_infeasible_2x2(tmp_path):
    path = _write(tmp_path, INFEASIBLE_2X2)
    for kwargs in ({"solver": "scs"}, {"solver": "clarabel"}, {"solver": "scs", "use_presolve": False}):
        result = solve_file(path, **kwargs)
        assert result.status == "infeasible", (kwargs, result.message)


def test_generic_cvxpy_backend(tmp_path):
    # any other solver name goes through the cvxpy reformulation
    feas = solve_file(_write(tmp_path, FEASIBLE_2X2), solver="CLARABEL")
    assert feas.status == "feasible", feas.message
    infeas = solve_file(_write(tmp_path, INFEASIBLE_2X2, name="i.dat-s"), solver="CLARABEL")
    assert infeas.status == "infeasible", infeas.message


def test_fully_pinned_constant_path(tmp_path):
    good = solve_file(_write(tmp_path, "1\n1\n1\n1.0\n1 1 1 1 1.0\n", name="g.dat-s"))
    assert good.solver == "presolve" and good.status == "feasible"
    bad = solve_file(_write(tmp_path, "1\n1\n1\n-1.0\n1 1 1 1 1.0\n", name="b.dat-s"))
    assert bad.solver == "presolve" and bad.status == "infeasible"


def test_diagonal_block_support(tmp_path):
    text = "2\n2\n2 -2\n1.0 0.3\n1 1 1 1 1.0\n2 2 1 1 1.0\n"
    # second block diagonal: entry 0.3 >= 0, the rest free
    result = solve_file(_write(tmp_path, text))
    assert result.status == "feasible"
    bad = "2\n2\n2 -2\n1.0 -0.3\n1 1 1 1 1.0\n2 2 1 1 1.0\n"
    result = solve_file(_write(tmp_path, bad, name="bad.dat-s"))
    assert result.status == "infeasible"


def test_parse_failure_is_inconclusive(tmp_path):
    result = solve_file(tmp_path / "missing.dat-s")
    assert result.status == "inconclusive"
    assert "parse failure" in result.message


def test_level_zero_export_feasible(tmp_path):
    export_scan(tmp_path, level="0", iterations=1)
    path = sorted(tmp_path.glob("*.dat-s"))[0]
    result = solve_file(path)
    assert result.status == "feasible"


def test_honest_model_without_commutation_feasible(tmp_path):
    export_scan(tmp_path, level="1+AB", eta_lo=0.998, eta_hi=1.0, iterations=1, no_commute=True)
    path = sorted(tmp_path.glob("*.dat-s"))[0]
    result = solve_file(path)
    assert result.status == "feasible", result.message


def test_commuting_level3_flips_at_half(tmp_path):
    # the routed scenario's signature fact: eta=0.6 refutes joint
    # measurability at relaxation level 3, eta=0.4 admits it
    export_scan(tmp_path, level="3", eta_lo=0.4, eta_hi=0.8, iterations=1)  # probes 0.6
    probe_06 = sorted(tmp_path.glob("*.dat-s"))[0]
    result = solve_file(probe_06)
    assert result.status == "infeasible", result.message

    low = tmp_path / "low"
    export_scan(low, level="3", eta_lo=0.2, eta_hi=0.6, iterations=1)  # probes 0.4
    result_low = solve_file(sorted(low.glob("*.dat-s"))[0])
    assert result_low.status == "feasible", result_low.message


def test_scs_presolve_consistency_on_export(tmp_path):
    export_scan(tmp_path, level="1+AB", eta_lo=0.5, eta_hi=0.9, iterations=1)  # probes 0.7
    path = sorted(tmp_path.glob("*.dat-s"))[0]
    with_pre = solve_file(path)
    without = solve_file(path, use_presolve=False)
    assert with_pre.status == without.status
    assert with_pre.presolve["merged_rows"] > 0
    assert np.isfinite(with_pre.primal_objective)
