"""End-to-end pipeline: export with the CLI, solve with the bridge.

The library side only writes files (SDPA problems, sidecars, plan JSON);
the bridge package consumes them and reports the efficiency-threshold
bisection.  Requires both packages installed (`pip install -e .` in the
repo root and in bridge/).
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as td:
    out = Path(td) / "scan"
    print("=== exporting a small bisection plan (rbb84, N=1, level 1+AB, v=1) ===")
    subprocess.run(
        [
            "routed-bell", "eta-scan", "--strategy", "rbb84", "--n", "1",
            "--level", "1+AB", "--v", "1.0",
            "--eta-lo", "0.3", "--eta-hi", "0.72", "--iterations", "4",
            "--out", str(out),
        ],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    plan = next(out.glob("plan_*.json"))
    print(f"  wrote {len(list(out.glob('*.dat-s')))} problems + {plan.name}")

    print("\n=== bridge bisection (infeasible probes push the bound down) ===")
    proc = subprocess.run(
        [sys.executable, "-m", "sdp_bridge", "bisect", str(plan)],
        check=True,
        capture_output=True,
        text=True,
    )
    print(proc.stdout)

    print("=== one-off solve of a single exported problem ===")
    first = sorted(out.glob("*.dat-s"))[0]
    proc = subprocess.run(
        [sys.executable, "-m", "sdp_bridge", "solve", str(first)],
        capture_output=True,
        text=True,
    )
    info = json.loads(proc.stdout)
    print(f"  {first.name}: {info['status']} ({info['message']})")
