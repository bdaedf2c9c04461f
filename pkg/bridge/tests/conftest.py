"""Shared fixtures: export problems through the producing tool's CLI only."""

import shutil
import subprocess
from pathlib import Path

import pytest

EXPORTER = shutil.which("routed-bell")


def export_scan(out_dir: Path, *, strategy="rbb84", n=1, level="1+AB", v="1.0",
                eta_lo=0.0, eta_hi=1.0, iterations=1, no_commute=False) -> Path:
    """Run the exporter CLI; returns the plan JSON path."""
    if EXPORTER is None:
        pytest.skip("routed-bell exporter CLI not on PATH")
    cmd = [
        EXPORTER, "eta-scan", "--strategy", strategy, "--n", str(n),
        "--level", level, "--v", str(v),
        "--eta-lo", str(eta_lo), "--eta-hi", str(eta_hi),
        "--iterations", str(iterations), "--out", str(out_dir),
    ]
    if no_commute:
        cmd.append("--no-commute-b1")
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    plans = sorted(out_dir.glob("plan_*.json"))
    assert plans, "exporter produced no plan"
    return plans[0]
