"""Error-budget thresholds: how self-testing noise inflates eta*.

The self-testing error f feeds the perturbation bound delta; shifting the
penalty by sqrt(delta) keeps the click-count bound flat and yields the
robust critical efficiency.
"""

import numpy as np

from routed_bell import RobustnessInput, delta_bound, robust_eta_star, robust_gram_bound

print("=== delta and eta* as the self-testing error grows (N=1) ===")
for f in (0.0, 1e-4, 5e-4, 1e-3, 2e-3):
    inp = RobustnessInput(n_copies=1, epsilon=0.01, f_value=f)
    delta = delta_bound(inp)
    try:
        q, eta = robust_eta_star(inp)
        print(f"  f={f:7.4f}: delta={delta:.6f}  q={q:.6f}  eta*={eta:.6f}")
    except ValueError as exc:
        print(f"  f={f:7.4f}: delta={delta:.6f}  {exc}")

print("\n=== both translation models, N=2, delta forced to 0.004 ===")
for linear in (False, True):
    inp = RobustnessInput(n_copies=2, epsilon=0.02, f_value=0.0, linear_translation=linear)
    _, eta = robust_eta_star(inp, delta=0.004)
    label = "epsilon enters the score" if linear else "detection-only"
    print(f"  {label:24s}: eta* = {eta:.6f}  (ideal 0.25)")

print("\n=== the shifted penalty flattens the click-count bound ===")
delta = 0.01
q_shifted = 2 ** -0.5 + np.sqrt(delta)
for q, label in ((2 ** -0.5, "unshifted"), (q_shifted, "shifted")):
    vals = [robust_gram_bound(2, k, delta, q) for k in range(1, 9)]
    print(f"  {label:9s} q={q:.4f}: bounds {np.round(vals, 6)}")
