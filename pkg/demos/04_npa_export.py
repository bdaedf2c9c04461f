"""Compiling the commuting-far-device feasibility problem to SDPA files.

Shows the monomial bookkeeping behind the moment matrix, exports one
problem with its JSON sidecar, and prints the bisection plan a solver
bridge would execute.
"""

import tempfile
from pathlib import Path

from routed_bell import build_problem, build_strategy, bisection_plan, parse_sdpa, write_sdpa
from routed_bell.npa import write_sidecar

strategy = build_strategy("rbb84", 1, eta=0.6, visibility=1.0)

print("=== moment problem sizes by level (rbb84, N=1) ===")
for level in ("0", "1", "1+AB", "2", "3"):
    problem = build_problem(strategy, level=level)
    print(f"  level {level:5s}: basis {problem.basis_size:4d}  moments {len(problem.cells_by_id):5d}  "
          f"equality rows {problem.n_constraints:6d}")

problem = build_problem(strategy, level="1")
print("\n=== level-1 basis monomials ===")
for word in problem.basis:
    pretty = " ".join(
        f"{s.party}[{s.setting}|{s.outcome}]" for s in (problem.symbols.describe(c) for c in word)
    )
    print(f"  {pretty or '1'}")

with tempfile.TemporaryDirectory() as td:
    path = write_sdpa(problem, Path(td) / "example.dat-s")
    sidecar = write_sidecar(problem, path)
    parsed = parse_sdpa(path)
    print(f"\nwrote {path.name}: m={parsed['m']} block sizes {parsed['block_sizes']} "
          f"entries {len(parsed['entries'])}; sidecar {sidecar.name}")

print("\n=== bisection plan (3 iterations over [0.2, 0.3]) ===")
for eta, name in bisection_plan("rbb84", 1, 1.0, "3", 0.2, 0.3, 3):
    print(f"  probe eta={eta:<12g} -> {name}")
