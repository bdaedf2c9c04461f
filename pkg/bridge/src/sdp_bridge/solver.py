"""Feasibility classification of parsed SDPA problems.

The equality structure of moment-problem exports is heavily redundant (most
rows just tie two cells of the PSD block together, or pin a cell to a
constant).  A union-find presolve eliminates those rows before the cone
program reaches the solver; what remains is

    find z  such that  R z = r  and  Y(z) (block-diagonal, affine in z) >= 0,

handed to SCS in its native form.  Classification is deliberately
asymmetric: "infeasible" requires a clean solver certificate, anything
murky stays "inconclusive".
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .sdpa import SdpaProblem, parse_sdpa_file

DEFAULT_TOLERANCE = 1e-7
RESIDUAL_INFEASIBLE_GAP = 1e-5


@dataclass
class SolveResult:
    problem_file: str
    status: str  # feasible | infeasible | inconclusive
    primal_objective: float | None = None
    dual_objective: float | None = None
    tolerance: float = DEFAULT_TOLERANCE
    solver: str = "scs"
    message: str = ""
    solve_time: float = 0.0
    presolve: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "problem_file": self.problem_file,
            "status": self.status,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "tolerance": self.tolerance,
            "solver": self.solver,
            "message": self.message,
            "solve_time_s": self.solve_time,
            "presolve": self.presolve,
        }


class _UnionFind:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class _Reduced:
    """Problem after presolve, ready for cone assembly."""

    n_classes: int
    class_of_cell: dict[tuple[int, int, int], int]
    fixed: dict[int, float]  # class -> pinned value
    rows: list[tuple[dict[int, float], float]]  # over free classes
    contradiction: float  # largest unresolvable residual seen
    merged_rows: int
    pinned_rows: int


def _effective(entry: tuple[int, int, int, float]) -> float:
    _, r, c, v = entry
    return v if r == c else 2.0 * v


def presolve(problem: SdpaProblem) -> _Reduced:
    """Eliminate two-cell equalities and pinned cells via union-find."""
    cells: list[tuple[int, int, int]] = []
    for b, size in enumerate(problem.block_sizes):
        n = abs(size)
        if size > 0:
            for j in range(n):
                for i in range(j, n):
                    cells.append((b, i, j))
        else:
            for i in range(n):
                cells.append((b, i, i))
    index_of = {cell: k for k, cell in enumerate(cells)}
    uf = _UnionFind(len(cells))

    def _cell_key(entry: tuple[int, int, int, float]) -> tuple[int, int, int]:
        b, r, c, _ = entry
        return (b, max(r, c), min(r, c))  # lower-triangle keys

    merged = 0
    deferred: list[int] = []
    for row_idx, entries in enumerate(problem.entries):
        if len(entries) == 2 and problem.c[row_idx] == 0.0:
            a1, a2 = _effective(entries[0]), _effective(entries[1])
            if a1 == -a2 and a1 != 0.0:
                uf.union(index_of[_cell_key(entries[0])], index_of[_cell_key(entries[1])])
                merged += 1
                continue
        deferred.append(row_idx)

    class_ids: dict[int, int] = {}
    class_of_cell: dict[tuple[int, int, int], int] = {}
    for k, cell in enumerate(cells):
        root = uf.find(k)
        if root not in class_ids:
            class_ids[root] = len(class_ids)
        class_of_cell[cell] = class_ids[root]
    n_classes = len(class_ids)

    fixed: dict[int, float] = {}
    contradiction = 0.0
    pinned = 0
    rows: list[tuple[dict[int, float], float]] = []
    remaining: list[int] = []
    for row_idx in deferred:
        entries = problem.entries[row_idx]
        if len(entries) == 1:
            coeff = _effective(entries[0])
            if coeff != 0.0:
                cls = class_of_cell[_cell_key(entries[0])]
                value = problem.c[row_idx] / coeff
                if cls in fixed:
                    contradiction = max(contradiction, abs(fixed[cls] - value))
                else:
                    fixed[cls] = value
                    pinned += 1
                continue
        remaining.append(row_idx)

    for row_idx in remaining:
        coeffs: dict[int, float] = {}
        target = problem.c[row_idx]
        for entry in problem.entries[row_idx]:
            cls = class_of_cell[_cell_key(entry)]
            coeffs[cls] = coeffs.get(cls, 0.0) + _effective(entry)
        for cls in [c for c in coeffs if c in fixed]:
            target -= coeffs.pop(cls) * fixed[cls]
        coeffs = {c: v for c, v in coeffs.items() if v != 0.0}
        if not coeffs:
            contradiction = max(contradiction, abs(target))
            continue
        rows.append((coeffs, target))

    return _Reduced(
        n_classes=n_classes,
        class_of_cell=class_of_cell,
        fixed=fixed,
        rows=rows,
        contradiction=contradiction,
        merged_rows=merged,
        pinned_rows=pinned,
    )


def _cone_data(problem: SdpaProblem, red: _Reduced, triangle: str = "lower"):
    """Assemble the margin program: minimize t with Y(z) + t*I in the cone.

    Moment problems at exact quantum points have no Slater point, so plain
    feasibility stalls first-order solvers.  The margin variable restores
    strict feasibility; the optimal t is -lambda_min over the constrained
    family, so its sign settles feasibility with a quantitative gap.
    The margin column is the last variable.  ``triangle`` picks the PSD
    vectorization: scs scans the lower triangle column-wise, clarabel the
    upper.
    """
    free_index: dict[int, int] = {}
    for cls in range(red.n_classes):
        if cls not in red.fixed:
            free_index[cls] = len(free_index)
    n_free = len(free_index)
    t_col = n_free

    rows_a: list[int] = []
    cols_a: list[int] = []
    vals_a: list[float] = []
    b: list[float] = []
    row_counter = 0
    for coeffs, target in red.rows:
        for cls, v in coeffs.items():
            rows_a.append(row_counter)
            cols_a.append(free_index[cls])
            vals_a.append(v)
        b.append(target)
        row_counter += 1
    n_zero = row_counter

    l_rows = 0
    psd_sizes: list[int] = []
    sqrt2 = float(np.sqrt(2.0))

    def _emit(cell: tuple[int, int, int], scale: float, with_margin: bool) -> None:
        nonlocal row_counter
        cls = red.class_of_cell[cell]
        if cls in red.fixed:
            b.append(scale * red.fixed[cls])
        else:
            rows_a.append(row_counter)
            cols_a.append(free_index[cls])
            vals_a.append(-scale)
            b.append(0.0)
        if with_margin:
            rows_a.append(row_counter)
            cols_a.append(t_col)
            vals_a.append(-scale)
        row_counter += 1

    for bi, size in enumerate(problem.block_sizes):
        if size < 0:
            for i in range(-size):
                _emit((bi, i, i), 1.0, with_margin=True)
            l_rows += -size
    for bi, size in enumerate(problem.block_sizes):
        if size > 0:
            for j in range(size):
                rows = range(j, size) if triangle == "lower" else range(0, j + 1)
                for i in rows:
                    cell = (bi, max(i, j), min(i, j))
                    _emit(cell, 1.0 if i == j else sqrt2, with_margin=(i == j))
            psd_sizes.append(size)

    a_mat = sp.csc_matrix(
        (np.array(vals_a), (np.array(rows_a, dtype=np.int64), np.array(cols_a, dtype=np.int64))),
        shape=(row_counter, n_free + 1),
    )
    c = np.zeros(n_free + 1)
    c[t_col] = 1.0
    data = {"A": a_mat, "b": np.array(b), "c": c}
    cone = {"z": n_zero, "l": l_rows, "s": psd_sizes}
    return data, cone


def solve_file(
    path: str | Path,
    tolerance: float = DEFAULT_TOLERANCE,
    solver: str = "scs",
    use_presolve: bool = True,
    max_iters: int = 30_000,
    solver_eps: float = 2e-6,
) -> SolveResult:
    """Parse one .dat-s file and classify its feasibility.

    The PSD margin (the minimal t with Y + t*I >= 0 over the constrained
    moment family) is computed to ``solver_eps`` accuracy; "feasible" means
    the margin is below max(tolerance, 2*solver_eps), "infeasible" needs
    the certified dual lower bound above the 1e-5 gap.  The asymmetry keeps
    bisection upper bounds valid whenever a probe is murky.
    """
    t0 = time.perf_counter()
    try:
        problem = parse_sdpa_file(path)
    except (OSError, ValueError) as exc:
        return SolveResult(
            problem_file=str(path), status="inconclusive", message=f"parse failure: {exc}", tolerance=tolerance
        )
    if use_presolve:
        red = presolve(problem)
    else:
        red = _no_presolve(problem)
    info = {"merged_rows": red.merged_rows, "pinned": red.pinned_rows, "free_classes": red.n_classes - len(red.fixed)}
    if red.contradiction > RESIDUAL_INFEASIBLE_GAP:
        return SolveResult(
            problem_file=str(path),
            status="infeasible",
            message=f"presolve contradiction {red.contradiction:.2e}",
            tolerance=tolerance,
            solve_time=time.perf_counter() - t0,
            presolve=info,
        )
    if red.contradiction > tolerance:
        return SolveResult(
            problem_file=str(path),
            status="inconclusive",
            message=f"presolve residual {red.contradiction:.2e} above tolerance",
            tolerance=tolerance,
            solve_time=time.perf_counter() - t0,
            presolve=info,
        )

    data, cone = _cone_data(problem, red, triangle="lower")
    if data["A"].shape[1] == 1:
        # only the margin column survived presolve: direct PSD check
        verdict, message = _constant_feasibility(data, cone, tolerance)
        return SolveResult(
            problem_file=str(path),
            status=verdict,
            tolerance=tolerance,
            solver="presolve",
            message=message,
            solve_time=time.perf_counter() - t0,
            presolve=info,
        )
    if solver == "clarabel":
        data_u, cone_u = _cone_data(problem, red, triangle="upper")
        return _solve_clarabel(path, data_u, cone_u, tolerance, info, t0)
    if solver != "scs":
        return _solve_cvxpy(path, data, cone, tolerance, solver, info, t0)

    import scs

    scs_solver = scs.SCS(
        data,
        cone,
        eps_abs=solver_eps,
        eps_rel=solver_eps,
        eps_infeas=1e-9,
        max_iters=max_iters,
        verbose=False,
    )
    sol = scs_solver.solve()
    status = str(sol["info"]["status"]).lower()
    margin_high = float(sol["info"].get("pobj", np.inf))
    margin_low = float(sol["info"].get("dobj", -np.inf))
    # asymmetric rule: feasibility within solver accuracy is accepted, but
    # infeasibility needs the certified dual bound clearly above it (the
    # dual bound on a positive margin is the solver's infeasibility
    # certificate for the original feasibility question)
    feas_tol = max(tolerance, 2.0 * solver_eps)
    gap_tol = max(tolerance, 3.0 * solver_eps)
    if status == "solved":
        if margin_high <= feas_tol:
            verdict = "feasible"
        elif margin_low > gap_tol:
            verdict = "infeasible"
        else:
            verdict = "inconclusive"
    else:
        verdict = "inconclusive"
    return SolveResult(
        problem_file=str(path),
        status=verdict,
        primal_objective=margin_high,
        dual_objective=margin_low,
        tolerance=tolerance,
        solver="scs",
        message=f"{status}; psd margin in [{margin_low:.3e}, {margin_high:.3e}]",
        solve_time=time.perf_counter() - t0,
        presolve=info,
    )


def _constant_feasibility(data: dict, cone: dict, tolerance: float) -> tuple[str, str]:
    """Classify a problem with no remaining degrees of freedom."""
    b = data["b"]
    worst = 0.0
    if cone["z"]:
        worst = float(np.max(np.abs(b[: cone["z"]]))) if cone["z"] else 0.0
    offset = cone["z"]
    min_eig = np.inf
    if cone["l"]:
        min_eig = min(min_eig, float(np.min(b[offset : offset + cone["l"]])))
        offset += cone["l"]
    sqrt2 = float(np.sqrt(2.0))
    for size in cone["s"]:
        length = size * (size + 1) // 2
        svec = b[offset : offset + length]
        mat = np.zeros((size, size))
        pos = 0
        for j in range(size):
            for i in range(j, size):
                val = svec[pos] if i == j else svec[pos] / sqrt2
                mat[i, j] = val
                mat[j, i] = val
                pos += 1
        min_eig = min(min_eig, float(np.linalg.eigvalsh(mat)[0]))
        offset += length
    violation = max(worst, -min(min_eig, 0.0))
    if violation <= tolerance:
        return "feasible", f"constant matrix PSD within {violation:.2e}"
    if violation > RESIDUAL_INFEASIBLE_GAP:
        return "infeasible", f"constant matrix violates the cone by {violation:.2e}"
    return "inconclusive", f"constant-matrix violation {violation:.2e} in the gray zone"


def _no_presolve(problem: SdpaProblem) -> _Reduced:
    """Identity reduction: every cell its own class, all rows kept."""
    class_of_cell: dict[tuple[int, int, int], int] = {}
    for b, size in enumerate(problem.block_sizes):
        n = abs(size)
        if size > 0:
            for j in range(n):
                for i in range(j, n):
                    class_of_cell[(b, i, j)] = len(class_of_cell)
        else:
            for i in range(n):
                class_of_cell[(b, i, i)] = len(class_of_cell)
    rows = []
    for row_idx, entries in enumerate(problem.entries):
        coeffs: dict[int, float] = {}
        for entry in entries:
            bb, r, c, _ = entry
            key = (bb, max(r, c), min(r, c))
            coeffs[class_of_cell[key]] = coeffs.get(class_of_cell[key], 0.0) + _effective(entry)
        rows.append((coeffs, problem.c[row_idx]))
    return _Reduced(
        n_classes=len(class_of_cell),
        class_of_cell=class_of_cell,
        fixed={},
        rows=rows,
        contradiction=0.0,
        merged_rows=0,
        pinned_rows=0,
    )


def _classify_margin(
    status_clean: bool,
    margin_high: float,
    margin_low: float,
    tolerance: float,
    solver_eps: float = 1e-9,
) -> str:
    if not status_clean:
        return "inconclusive"
    if margin_high <= max(tolerance, 2.0 * solver_eps):
        return "feasible"
    if margin_low > max(tolerance, 3.0 * solver_eps):
        return "infeasible"
    return "inconclusive"


def _solve_clarabel(path, data, cone, tolerance, info, t0) -> SolveResult:
    """Interior-point backend; fast and precise on the smaller exports."""
    import clarabel

    n_cols = data["A"].shape[1]
    cones = []
    if cone["z"]:
        cones.append(clarabel.ZeroConeT(cone["z"]))
    if cone["l"]:
        cones.append(clarabel.NonnegativeConeT(cone["l"]))
    for size in cone["s"]:
        cones.append(clarabel.PSDTriangleConeT(size))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    solution = clarabel.DefaultSolver(
        sp.csc_matrix((n_cols, n_cols)), data["c"], data["A"], data["b"], cones, settings
    ).solve()
    status = str(solution.status)
    clean = status == "Solved"
    margin_high = float(solution.obj_val) if solution.obj_val is not None else np.inf
    margin_low = float(solution.obj_val_dual) if solution.obj_val_dual is not None else -np.inf
    return SolveResult(
        problem_file=str(path),
        status=_classify_margin(clean, margin_high, margin_low, tolerance),
        primal_objective=margin_high,
        dual_objective=margin_low,
        tolerance=tolerance,
        solver="clarabel",
        message=f"{status}; psd margin in [{margin_low:.3e}, {margin_high:.3e}]",
        solve_time=time.perf_counter() - t0,
        presolve=info,
    )


def _solve_cvxpy(path, data, cone, tolerance, solver, info, t0) -> SolveResult:
    """Generic backend: rebuild the cone program in cvxpy and defer to it."""
    import cvxpy as cp

    n_cols = data["A"].shape[1]
    z = cp.Variable(n_cols)
    expr = data["b"] - data["A"] @ z
    constraints = []
    offset = cone["z"]
    if cone["z"]:
        constraints.append(expr[: cone["z"]] == 0)
    if cone["l"]:
        constraints.append(expr[offset : offset + cone["l"]] >= 0)
        offset += cone["l"]
    sqrt2 = float(np.sqrt(2.0))
    for size in cone["s"]:
        length = size * (size + 1) // 2
        svec = expr[offset : offset + length]
        scales = []
        rows_idx = []
        cols_idx = []
        for j in range(size):
            for i in range(j, size):
                rows_idx.append(i)
                cols_idx.append(j)
                scales.append(1.0 if i == j else 1.0 / sqrt2)
        s_var = cp.Variable((size, size), PSD=True)
        constraints.append(s_var[rows_idx, cols_idx] == cp.multiply(np.array(scales), svec))
        offset += length
    prob = cp.Problem(cp.Minimize(data["c"] @ z), constraints)
    try:
        prob.solve(solver=solver.upper(), verbose=False)
    except cp.SolverError as exc:
        return SolveResult(problem_file=str(path), status="inconclusive", message=str(exc), tolerance=tolerance)
    if prob.status != "optimal" or prob.value is None:
        verdict = "inconclusive"
    elif prob.value <= tolerance:
        verdict = "feasible"
    elif prob.value > RESIDUAL_INFEASIBLE_GAP:
        verdict = "infeasible"
    else:
        verdict = "inconclusive"
    return SolveResult(
        problem_file=str(path),
        status=verdict,
        primal_objective=None if prob.value is None else float(prob.value),
        tolerance=tolerance,
        solver=solver,
        message=f"{prob.status}; psd margin {prob.value}",
        solve_time=time.perf_counter() - t0,
        presolve=info,
    )
