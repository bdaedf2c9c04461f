"""Command-line surface: outputs, schemas and exit codes."""

import csv
import io
import json
import math
from contextlib import redirect_stdout

import pytest

from routed_bell.cli import main
from routed_bell.inequalities import TSIRELSON_WIN

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _run(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        try:
            code = main(argv)
        except SystemExit as exc:  # argparse-style exits
            code = exc.code if isinstance(exc.code, int) else 1
    return code, buf.getvalue()


def _csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_score_certified_example():
    code, out = _run(
        ["score", "--strategy", "rbb84", "--n", "1", "--eta", "1", "--v", "1", "--q", repr(INV_SQRT2)]
    )
    assert code == 0
    rows = {r["functional"]: r for r in _csv_rows(out)}
    pen = rows["penalized_bb84"]
    assert float(pen["value"]) == pytest.approx(0.2928932, abs=1e-6)
    assert float(pen["jm_threshold"]) == pytest.approx(0.1464466, abs=1e-6)
    assert pen["certified"] == "True"
    assert float(rows["chsh_product_b0"]["value"]) == pytest.approx(TSIRELSON_WIN, abs=1e-9)


def test_score_eta_zero_uncertified():
    code, out = _run(["score", "--strategy", "rbb84", "--n", "1", "--eta", "0", "--v", "1"])
    assert code == 0
    pen = {r["functional"]: r for r in _csv_rows(out)}["penalized_bb84"]
    assert float(pen["value"]) == pytest.approx(0.0, abs=1e-12)
    assert pen["certified"] == "False"


def test_score_boundary_efficiency():
    q = TSIRELSON_WIN * (4 - math.sqrt(2)) / 4  # below beta window: warns, still computed
    with pytest.warns(UserWarning):
        code, out = _run(
            ["score", "--strategy", "rchsh", "--n", "2", "--eta", "0.25", "--v", "1", "--q", repr(q)]
        )
    assert code == 0
    pen = {r["functional"]: r for r in _csv_rows(out)}["penalized_chsh"]
    assert abs(float(pen["value"]) - float(pen["jm_threshold"])) <= 1e-9
    assert pen["certified"] == "False"


def test_score_json_format():
    code, out = _run(
        ["score", "--strategy", "rbb84", "--n", "1", "--eta", "0.5", "--v", "1", "--format", "json"]
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["metadata"]["version"]
    assert {row["functional"] for row in payload["rows"]} == {"chsh_product_b0", "penalized_bb84"}


def test_jm_scan_verified_exit_zero(tmp_path):
    out_file = tmp_path / "report.json"
    code, _ = _run(
        ["jm-scan", "--family", "bb84", "--n", "2", "--q", repr(INV_SQRT2), "--out", str(out_file)]
    )
    assert code == 0
    report = json.loads(out_file.read_text())["report"]
    assert report["verified"] is True
    assert report["patterns_scanned"] == 625
    assert report["max_lambda"] == pytest.approx(1 - INV_SQRT2, abs=1e-9)


def test_jm_scan_unverified_exit_three():
    code, out = _run(["jm-scan", "--family", "chsh", "--n", "1", "--q", "0.6"])
    assert code == 3
    assert json.loads(out)["report"]["verified"] is False


def test_jm_scan_rejects_large_n():
    code, _ = _run(["jm-scan", "--family", "bb84", "--n", "4", "--q", "0.8"])
    assert code == 2


def test_jm_scan_env_workers(monkeypatch):
    monkeypatch.setenv("ROUTED_BELL_THREADS", "2")
    code, out = _run(["jm-scan", "--family", "bb84", "--n", "1", "--q", repr(INV_SQRT2)])
    assert code == 0
    assert json.loads(out)["report"]["workers"] == 2


def test_eta_scan_grid_files(tmp_path):
    out_dir = tmp_path / "scan"
    code, out = _run(
        [
            "eta-scan", "--strategy", "rbb84", "--n", "1", "--level", "1",
            "--v-grid", "0:1:11", "--iterations", "1", "--out", str(out_dir),
        ]
    )
    assert code == 0
    dats = sorted(out_dir.glob("*.dat-s"))
    assert len(dats) == 11
    assert len(sorted(out_dir.glob("*.dat-s.json"))) == 11
    assert len(sorted(out_dir.glob("plan_*.json"))) == 11
    rows = _csv_rows(out)
    assert len(rows) == 11
    by_v = {float(r["v"]): r for r in rows}
    assert float(by_v[1.0]["eta_star_upper"]) == pytest.approx(0.5, abs=1e-12)
    assert by_v[1.0]["method"] == "closed-form"
    assert by_v[0.5]["eta_star_upper"] == ""
    assert (out_dir / "eta_scan.csv").exists()


def test_eta_scan_closed_form_n2(tmp_path):
    code, out = _run(
        [
            "eta-scan", "--strategy", "rbb84", "--n", "2", "--level", "1",
            "--v", "1.0", "--iterations", "1", "--out", str(tmp_path / "s2"),
        ]
    )
    assert code == 0
    row = _csv_rows(out)[0]
    assert float(row["eta_star_upper"]) == pytest.approx(0.25, abs=1e-12)


def test_robust_f_zero():
    code, out = _run(["robust", "--n", "2", "--f", "0"])
    assert code == 0
    payload = json.loads(out)
    assert payload["eta_star_detection_only"] == pytest.approx(0.25, abs=0)
    assert payload["delta"] == 0.0


def test_robust_delta_override():
    code, out = _run(["robust", "--n", "1", "--f", "0", "--delta", "0.01"])
    assert code == 0
    payload = json.loads(out)
    margin = 1 - INV_SQRT2
    assert payload["eta_star_detection_only"] == pytest.approx(0.5 * margin / (margin - 0.1), abs=1e-9)


def test_robust_empty_window_exit_two():
    code, out = _run(["robust", "--n", "1", "--f", "0", "--delta", "0.09"])
    assert code == 2
    assert "robustness window empty" in json.loads(out)["error"]


def test_usage_errors_exit_one(capsys):
    code, _ = _run(["score", "--strategy", "rbb84", "--n", "1", "--eta", "1.5", "--v", "1"])
    assert code == 1
    code, _ = _run(["score", "--strategy", "nope", "--n", "1", "--eta", "1"])
    assert code == 1


def test_outputs_deterministic(tmp_path):
    args = ["score", "--strategy", "rchsh", "--n", "1", "--eta", "0.77", "--v", "0.9"]
    _, out1 = _run(args)
    _, out2 = _run(args)
    assert out1 == out2
