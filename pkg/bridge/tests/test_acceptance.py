"""Acceptance: endpoint brackets at perfect visibility and the N=1 vs N=2
ordering under source noise.

Each criterion prints one PASS line.  Exact curve values have no published
table; only the v=1 endpoints and the strict ordering at v=0.95 are
asserted.  Expect several minutes of SDP solving.
"""

import pytest

from sdp_bridge.bisection import run_bisection

from conftest import export_scan


def _report(name: str) -> None:
    print(f"PASS: {name}")


def test_endpoint_rbb84_half(tmp_path):
    plan = export_scan(
        tmp_path, strategy="rbb84", n=1, level="3", v="1.0",
        eta_lo=0.3, eta_hi=0.72, iterations=6,
    )
    outcome = run_bisection(plan, solver_eps=2e-6)
    assert outcome.flagged is None, outcome.flagged
    assert abs(outcome.eta_hi - 0.5) <= 0.01, outcome.to_dict()
    assert abs(outcome.eta_lo - 0.5) <= 0.01, outcome.to_dict()
    _report(
        "v=1 endpoint (rbb84, N=1, level 3): bisection bracket "
        f"[{outcome.eta_lo:.4f}, {outcome.eta_hi:.4f}] around 1/2"
    )


def test_endpoint_qubit_quarter(tmp_path):
    plan = export_scan(
        tmp_path, strategy="rbb84chsh", n=1, level="2+AAB1", v="1.0",
        eta_lo=0.16, eta_hi=0.33, iterations=6,
    )
    outcome = run_bisection(plan, solver_eps=5e-7)
    assert outcome.flagged is None, outcome.flagged
    assert abs(outcome.eta_hi - 0.25) <= 0.01, outcome.to_dict()
    assert abs(outcome.eta_lo - 0.25) <= 0.01, outcome.to_dict()
    _report(
        "v=1 endpoint (four-setting qubit protocol, level 2+AAB1): bracket "
        f"[{outcome.eta_lo:.4f}, {outcome.eta_hi:.4f}] around 1/4"
    )


@pytest.mark.parametrize(
    "strategy,window",
    [("rbb84", (0.6, 0.92)), ("rchsh", (0.52, 0.84))],
)
def test_parallel_repetition_more_robust_at_v095(tmp_path, strategy, window):
    lo, hi = window
    uppers = {}
    for n, level in ((1, "3"), (2, "1+AB")):
        d = tmp_path / f"{strategy}_n{n}"
        plan = export_scan(
            d, strategy=strategy, n=n, level=level, v="0.95",
            eta_lo=lo, eta_hi=hi, iterations=4,
        )
        outcome = run_bisection(plan, solver_eps=1e-5)
        assert outcome.flagged is None, outcome.flagged
        uppers[n] = outcome.eta_star_upper
    assert uppers[2] < uppers[1], uppers
    _report(
        f"v=0.95 ordering ({strategy}): two-copy upper bound {uppers[2]:.4f} "
        f"strictly below single-copy {uppers[1]:.4f}"
    )
