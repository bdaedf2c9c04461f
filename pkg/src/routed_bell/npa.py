"""Moment-matrix relaxations of the routed-Bell feasibility problem.

The noncommuting variables are projectors: Alice's and near-Bob's effects
with the last outcome eliminated by completeness, and the far device's click
effects with the no-click outcome eliminated.  Joint measurability of the
far device is modeled by letting its projectors commute across settings;
monomials are reduced to a canonical form under idempotence, same-setting
orthogonality, party commutation and (optionally) that far-device
commutation.  The resulting moment problem is written in SDPA sparse
format for any external solver.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .operators import psd_sqrt
from .strategies import RoutedStrategy, build_strategy, correlation

__all__ = [
    "OperatorSymbol",
    "MomentProblem",
    "parse_level",
    "build_problem",
    "write_sdpa",
    "parse_sdpa",
    "write_sidecar",
    "bisection_plan",
    "honest_moment_matrix",
    "constraint_residuals",
    "export_problem",
]

BASIS_CAP = 20000

PARTY_A = 0
PARTY_B0 = 1
PARTY_B1 = 2
_PARTY_NAMES = {PARTY_A: "A", PARTY_B0: "B0", PARTY_B1: "B1"}


@dataclass(frozen=True)
class OperatorSymbol:
    """One projector variable: (party, setting, outcome)."""

    party: str
    setting: int
    outcome: int


@dataclass(frozen=True)
class _SymbolTable:
    """Packed per-symbol metadata; symbol codes are indices into these."""

    party: tuple[int, ...]
    setting: tuple[int, ...]
    outcome: tuple[int, ...]

    def describe(self, code: int) -> OperatorSymbol:
        return OperatorSymbol(
            party=_PARTY_NAMES[self.party[code]],
            setting=self.setting[code],
            outcome=self.outcome[code],
        )

    @property
    def count(self) -> int:
        return len(self.party)

    def codes_of_party(self, party: int) -> list[int]:
        return [c for c in range(self.count) if self.party[c] == party]


def _symbol_table(n_a_settings: int, n_a_outcomes: int, n_b1_settings: int, n_b1_clicks: int) -> _SymbolTable:
    party: list[int] = []
    setting: list[int] = []
    outcome: list[int] = []
    for p, (n_set, n_out) in (
        (PARTY_A, (n_a_settings, n_a_outcomes - 1)),
        (PARTY_B0, (n_a_settings, n_a_outcomes - 1)),
        (PARTY_B1, (n_b1_settings, n_b1_clicks)),
    ):
        for s in range(n_set):
            for o in range(n_out):
                party.append(p)
                setting.append(s)
                outcome.append(o)
    return _SymbolTable(party=tuple(party), setting=tuple(setting), outcome=tuple(outcome))


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------


def canonical_word(word: tuple[int, ...], table: _SymbolTable, commute_b1: bool = True) -> tuple[int, ...] | None:
    """Reduce a product of projector symbols to canonical form (None = zero).

    Alice's symbols commute past both Bob legs and are pulled to the front.
    Repeated symbols collapse (idempotence); same-setting distinct-outcome
    projectors annihilate when they meet.  With ``commute_b1`` the far
    device's symbols additionally commute across settings, so maximal runs
    of them are kept sorted and the orthogonality check applies run-wide.
    """
    party = table.party
    setting = table.setting

    a_out: list[int] = []
    for s in word:
        if party[s] != PARTY_A:
            continue
        if a_out:
            top = a_out[-1]
            if top == s:
                continue
            if setting[top] == setting[s]:
                return None
        a_out.append(s)

    b_out: list[int] = []
    for s in word:
        p = party[s]
        if p == PARTY_A:
            continue
        if p == PARTY_B1 and commute_b1:
            # locate the trailing commuting run and insert in sorted order
            pos = len(b_out)
            insert_at = pos
            clash = False
            while pos > 0 and party[b_out[pos - 1]] == PARTY_B1:
                other = b_out[pos - 1]
                if other == s:
                    clash = True  # idempotent duplicate, drop the new symbol
                    break
                if setting[other] == setting[s]:
                    return None
                if other > s:
                    insert_at = pos - 1
                pos -= 1
            if clash:
                continue
            b_out.insert(insert_at, s)
        else:
            if b_out:
                top = b_out[-1]
                if top == s:
                    continue
                if party[top] == p and setting[top] == setting[s]:
                    return None
            b_out.append(s)
    return tuple(a_out) + tuple(b_out)


def _moment_rep(word: tuple[int, ...], table: _SymbolTable, commute_b1: bool) -> tuple[int, ...] | None:
    """Canonical representative shared by a monomial and its adjoint."""
    c1 = canonical_word(word, table, commute_b1)
    if c1 is None:
        return None
    c2 = canonical_word(c1[::-1], table, commute_b1)
    assert c2 is not None
    return min(c1, c2)


# ---------------------------------------------------------------------------
# Level grammar
# ---------------------------------------------------------------------------


def parse_level(spec: str) -> tuple[int, tuple[tuple[str, ...], ...]]:
    """Parse a relaxation level like "3", "1+AB" or "2+AAB1".

    Returns (base length, extra word shapes); shape tokens are A, B0, B1 or
    bare B, the latter standing for either Bob leg.
    """
    parts = spec.strip().split("+")
    head = parts[0].strip()
    if not head.isdigit():
        raise ValueError(f"level parse error at position 0: expected integer, got {head!r}")
    shapes: list[tuple[str, ...]] = []
    offset = len(parts[0]) + 1
    for part in parts[1:]:
        word = part.strip()
        if not word:
            raise ValueError(f"level parse error at position {offset}: empty word")
        tokens: list[str] = []
        i = 0
        while i < len(word):
            ch = word[i]
            if ch == "A":
                tokens.append("A")
                i += 1
            elif ch == "B":
                if i + 1 < len(word) and word[i + 1] in "01":
                    tokens.append("B" + word[i + 1])
                    i += 2
                else:
                    tokens.append("B")
                    i += 1
            else:
                raise ValueError(f"level parse error at position {offset + i}: unexpected {ch!r}")
        shapes.append(tuple(tokens))
        offset += len(part) + 1
    return int(head), tuple(shapes)


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentProblem:
    """Canonical basis, symbolic moment matrix and equality constraints.

    ``matrix_entries`` maps upper-triangle cells to moment ids;
    ``zero_cells`` lists cells whose monomial vanishes identically.
    ``equality_constraints`` holds the normalization and the fixed
    probability rows as (((moment id, coefficient), ...), target) pairs;
    the structural identities between cells sharing a moment id are
    implicit in ``cells_by_id`` and written out by :func:`write_sdpa`.
    The objective is identically zero (feasibility).
    """

    level_spec: str
    basis: tuple[tuple[int, ...], ...]
    matrix_entries: dict[tuple[int, int], int]
    zero_cells: tuple[tuple[int, int], ...]
    cells_by_id: tuple[tuple[tuple[int, int], ...], ...]
    equality_constraints: tuple[tuple[tuple[tuple[int, float], ...], float], ...]
    symbols: _SymbolTable
    metadata: dict

    @property
    def basis_size(self) -> int:
        return len(self.basis)

    @property
    def n_constraints(self) -> int:
        structural = sum(len(cells) - 1 for cells in self.cells_by_id)
        return len(self.equality_constraints) + structural + len(self.zero_cells)

    def rep_cell(self, moment_id: int) -> tuple[int, int]:
        return self.cells_by_id[moment_id][0]


@dataclass(frozen=True)
class _Structure:
    basis: tuple[tuple[int, ...], ...]
    matrix_entries: dict[tuple[int, int], int]
    zero_cells: tuple[tuple[int, int], ...]
    cells_by_id: tuple[tuple[tuple[int, int], ...], ...]
    rep_to_id: dict[tuple[int, ...], int]
    prob_rows: tuple[tuple[tuple[tuple[int, float], ...], str, tuple[int, int, int, int]], ...]
    symbols: _SymbolTable


def _effect_poly(party: int, setting: int, outcome: int, table: _SymbolTable, n_outcomes: int) -> dict[tuple[int, ...], float]:
    """Projector as a polynomial over symbol words (last outcome eliminated)."""
    codes = [
        c
        for c in range(table.count)
        if table.party[c] == party and table.setting[c] == setting
    ]
    if outcome < n_outcomes - 1:
        return {(codes[outcome],): 1.0}
    poly: dict[tuple[int, ...], float] = {(): 1.0}
    for c in codes:
        poly[(c,)] = -1.0
    return poly


def _basis_words(
    table: _SymbolTable,
    base_level: int,
    shapes: tuple[tuple[str, ...], ...],
    commute_b1: bool,
) -> list[tuple[int, ...]]:
    all_codes = list(range(table.count))
    token_sets = {
        "A": table.codes_of_party(PARTY_A),
        "B0": table.codes_of_party(PARTY_B0),
        "B1": table.codes_of_party(PARTY_B1),
        "B": table.codes_of_party(PARTY_B0) + table.codes_of_party(PARTY_B1),
    }
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []

    def _add(word: tuple[int, ...]) -> tuple[int, ...] | None:
        canon = canonical_word(word, table, commute_b1)
        if canon is not None and canon not in seen:
            seen.add(canon)
            out.append(canon)
            return canon
        return None

    _add(())
    # BFS over canonical words: every reduced word of length m+1 extends a
    # reduced word of length m, so extending canonical words covers all of
    # them without materializing the raw K^m product space.
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(base_level):
        new_frontier = []
        for word in frontier:
            for c in all_codes:
                fresh = _add(word + (c,))
                if fresh is not None:
                    new_frontier.append(fresh)
            if len(seen) > BASIS_CAP:
                raise ValueError("level too high for scenario")
        frontier = new_frontier
    for shape in shapes:
        words: list[tuple[int, ...]] = [()]
        for token in shape:
            words = [w + (c,) for w in words for c in token_sets[token]]
        for word in words:
            _add(word)
        if len(seen) > BASIS_CAP:
            raise ValueError("level too high for scenario")
    out.sort(key=lambda w: (len(w), w))
    if len(out) > BASIS_CAP:
        raise ValueError("level too high for scenario")
    return out


@lru_cache(maxsize=32)
def _structure(
    kind: str,
    n_copies: int,
    n_b1_settings: int,
    n_b1_clicks: int,
    level: str,
    constrain_long_path: bool,
    commute_b1: bool,
) -> _Structure:
    base_level, shapes = parse_level(level)
    d = 2**n_copies
    table = _symbol_table(d, d, n_b1_settings, n_b1_clicks)
    basis = tuple(_basis_words(table, base_level, shapes, commute_b1))

    matrix_entries: dict[tuple[int, int], int] = {}
    zero_cells: list[tuple[int, int]] = []
    cells_by_id: list[list[tuple[int, int]]] = []
    rep_to_id: dict[tuple[int, ...], int] = {}
    for r, u in enumerate(basis):
        for c in range(r, len(basis)):
            rep = _moment_rep(u[::-1] + basis[c], table, commute_b1)
            if rep is None:
                zero_cells.append((r, c))
                continue
            mid = rep_to_id.get(rep)
            if mid is None:
                mid = len(rep_to_id)
                rep_to_id[rep] = mid
                cells_by_id.append([])
            matrix_entries[(r, c)] = mid
            cells_by_id[mid].append((r, c))

    def _poly_row(
        poly_a: dict[tuple[int, ...], float],
        poly_b: dict[tuple[int, ...], float],
    ) -> tuple[tuple[int, float], ...] | None:
        coeffs: dict[int, float] = {}
        for wa, ca in poly_a.items():
            for wb, cb in poly_b.items():
                rep = _moment_rep(wa + wb, table, commute_b1)
                if rep is None:
                    continue
                mid = rep_to_id.get(rep)
                if mid is None:
                    return None  # monomial not covered by this basis
                coeffs[mid] = coeffs.get(mid, 0.0) + ca * cb
        return tuple(sorted((k, v) for k, v in coeffs.items() if v != 0.0))

    prob_rows: list[tuple[tuple[tuple[int, float], ...], str, tuple[int, int, int, int]]] = []
    seen_rows: set[tuple[tuple[int, float], ...]] = set()

    def _push(row: tuple[tuple[int, float], ...] | None, which: str, idx: tuple[int, int, int, int]) -> None:
        if row is None or row in seen_rows:
            return
        seen_rows.add(row)
        prob_rows.append((row, which, idx))

    for x in range(d):
        for a in range(d):
            pa = _effect_poly(PARTY_A, x, a, table, d)
            for y in range(d):
                for b in range(d):
                    _push(_poly_row(pa, _effect_poly(PARTY_B0, y, b, table, d)), "short", (x, y, a, b))
            if constrain_long_path:
                for y in range(n_b1_settings):
                    for b in range(n_b1_clicks + 1):
                        _push(
                            _poly_row(pa, _effect_poly(PARTY_B1, y, b, table, n_b1_clicks + 1)),
                            "long",
                            (x, y, a, b),
                        )

    return _Structure(
        basis=basis,
        matrix_entries=matrix_entries,
        zero_cells=tuple(zero_cells),
        cells_by_id=tuple(tuple(cells) for cells in cells_by_id),
        rep_to_id=rep_to_id,
        prob_rows=tuple(prob_rows),
        symbols=table,
    )


def build_problem(
    strategy: RoutedStrategy,
    eta: float | None = None,
    level: str = "1",
    constrain_long_path: bool = True,
    commute_b1: bool = True,
) -> MomentProblem:
    """Compile the feasibility moment problem for a strategy's correlation.

    Equality constraints pin every short-path probability to its Born value
    at the strategy's visibility and, when ``constrain_long_path``, every
    long-path probability to the eta-thinned values.  ``eta`` overrides the
    strategy's stored efficiency.  With ``commute_b1`` the far-device
    commutation (the joint-measurability hypothesis) is folded into monomial
    canonicalization; switching it off yields the sanity problem any honest
    quantum model satisfies.
    """
    if eta is None:
        eta = strategy.eta
    else:
        strategy = dataclasses.replace(strategy, eta=float(eta))
    struct = _structure(
        strategy.kind,
        strategy.n_copies,
        strategy.b1.n_settings,
        strategy.b1.outcomes_per_setting,
        level,
        constrain_long_path,
        commute_b1,
    )
    corr = correlation(strategy)

    constraints: list[tuple[tuple[tuple[int, float], ...], float]] = [(((0, 1.0),), 1.0)]
    for row, which, (x, y, a, b) in struct.prob_rows:
        table = corr.p_short if which == "short" else corr.p_long
        constraints.append((row, float(table[x, y, a, b])))

    meta = {
        "strategy": strategy.kind,
        "n_copies": strategy.n_copies,
        "visibility": strategy.visibility,
        "eta": strategy.eta,
        "level": level,
        "constrain_long_path": constrain_long_path,
        "commute_b1": commute_b1,
        "basis_size": len(struct.basis),
    }
    problem = MomentProblem(
        level_spec=level,
        basis=struct.basis,
        matrix_entries=struct.matrix_entries,
        zero_cells=struct.zero_cells,
        cells_by_id=struct.cells_by_id,
        equality_constraints=tuple(constraints),
        symbols=struct.symbols,
        metadata=meta,
    )
    meta["constraint_count"] = problem.n_constraints
    return problem


# ---------------------------------------------------------------------------
# SDPA sparse interchange
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return "%.17g" % value


def write_sdpa(problem: MomentProblem, path: str | Path) -> Path:
    """Write the problem as an SDPA sparse (.dat-s) file.

    The moment matrix is the single PSD block; every constraint is an exact
    equality row tr(F_i Y) = c_i (normalization, fixed probabilities, the
    structural cell identities, and vanishing cells).  Output is
    byte-reproducible for identical inputs: fixed row order, entries sorted
    by position, 17-significant-digit decimals.
    """
    path = Path(path)
    n = problem.basis_size
    rows: list[tuple[list[tuple[int, int, float]], float]] = []

    def _w(cell: tuple[int, int], coeff: float) -> tuple[int, int, float]:
        r, c = cell
        return (r, c, coeff if r == c else 0.5 * coeff)

    for coeffs, target in problem.equality_constraints:
        entries = [_w(problem.rep_cell(mid), coeff) for mid, coeff in coeffs if coeff != 0.0]
        rows.append((entries, target))
    for cells in problem.cells_by_id:
        rep = cells[0]
        for cell in cells[1:]:
            rows.append(([_w(rep, 1.0), _w(cell, -1.0)], 0.0))
    for cell in problem.zero_cells:
        rows.append(([_w(cell, 1.0)], 0.0))

    lines = [str(len(rows)), "1", str(n), " ".join(_fmt(t) for _, t in rows)]
    for i, (entries, _) in enumerate(rows, start=1):
        for r, c, v in sorted(entries):
            lines.append(f"{i} 1 {r + 1} {c + 1} {_fmt(v)}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def parse_sdpa(path: str | Path) -> dict:
    """Parse an SDPA sparse file back into its (m, blocks, c, entries) tuple."""
    tokens_per_line = []
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.strip()
        if not line or line[0] in "*\"":
            continue
        tokens_per_line.append(line)
    m = int(tokens_per_line[0].split()[0])
    nblocks = int(tokens_per_line[1].split()[0])
    block_sizes = [int(t.strip("{}(),")) for t in tokens_per_line[2].replace(",", " ").split()]
    c = [float(t) for t in tokens_per_line[3].replace(",", " ").split()]
    entries = []
    for line in tokens_per_line[4:]:
        parts = line.split()
        entries.append((int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])))
    return {"m": m, "n_blocks": nblocks, "block_sizes": block_sizes, "c": c, "entries": entries}


def write_sidecar(problem: MomentProblem, sdpa_path: str | Path) -> Path:
    """JSON sidecar describing the exported problem (schema for the bridge)."""
    sdpa_path = Path(sdpa_path)
    sidecar = sdpa_path.with_suffix(sdpa_path.suffix + ".json")
    payload = dict(problem.metadata)
    payload["sdpa_file"] = sdpa_path.name
    payload["format"] = "sdpa-sparse"
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="ascii")
    return sidecar


# ---------------------------------------------------------------------------
# Bisection planning
# ---------------------------------------------------------------------------


def _level_slug(level: str) -> str:
    return level.replace("+", "p")


def bisection_plan(
    strategy_kind: str,
    n_copies: int,
    visibility: float,
    level: str,
    eta_lo: float = 0.0,
    eta_hi: float = 1.0,
    iterations: int = 1,
) -> list[tuple[float, str]]:
    """Deterministic midpoint probe schedule for the efficiency threshold.

    Lists every probe the bisection walk could visit (the full midpoint
    tree, breadth-first), each with the SDPA file name the bridge must
    solve.  Decision rule at each probe: infeasible means no jointly
    measurable model, so the threshold lies below and the walk descends.
    """
    if not 0.0 <= eta_lo < eta_hi <= 1.0:
        raise ValueError("need 0 <= eta_lo < eta_hi <= 1")
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    entries: list[tuple[float, str]] = []
    intervals = [(eta_lo, eta_hi)]
    for _ in range(iterations):
        next_intervals = []
        for lo, hi in intervals:
            mid = 0.5 * (lo + hi)
            name = (
                f"{strategy_kind}_n{n_copies}_v{visibility:.6f}"
                f"_eta{mid:.10f}_lvl{_level_slug(level)}.dat-s"
            )
            entries.append((mid, name))
            next_intervals.append((lo, mid))
            next_intervals.append((mid, hi))
        intervals = next_intervals
    return entries


# ---------------------------------------------------------------------------
# Honest-model substitution
# ---------------------------------------------------------------------------


def _symbol_matrices(problem: MomentProblem, strategy: RoutedStrategy) -> list[np.ndarray]:
    d_a = 2**strategy.n_copies
    d_b = strategy.b1.dim
    eye_a = np.eye(d_a, dtype=complex)
    eye_b = np.eye(d_b, dtype=complex)
    mats = []
    table = problem.symbols
    for code in range(table.count):
        p, s, o = table.party[code], table.setting[code], table.outcome[code]
        if p == PARTY_A:
            mats.append(np.kron(strategy.alice.effects[(s, o)].entries, eye_b))
        elif p == PARTY_B0:
            mats.append(np.kron(eye_a, strategy.b0.effects[(s, o)].entries))
        else:
            mats.append(np.kron(eye_a, strategy.b1.effects[(s, o)].entries))
    return mats


def honest_moment_matrix(problem: MomentProblem, strategy: RoutedStrategy) -> np.ndarray:
    """Substitute the honest strategy's Born moments into the moment matrix.

    Returns the full Gram matrix M[u, v] = tr(rho u^dagger v) over the
    basis, which is PSD for any genuine quantum model.  Meaningful for
    problems built without far-device commutation and at eta = 1 (the
    lossless honest device is projective; the thinned one is not).
    """
    sym_mats = _symbol_matrices(problem, strategy)
    root = psd_sqrt(strategy.state).entries
    dim = root.shape[0]
    vecs = np.empty((problem.basis_size, dim * dim), dtype=complex)
    for i, word in enumerate(problem.basis):
        op = np.eye(dim, dtype=complex)
        for code in word:
            op = op @ sym_mats[code]
        vecs[i] = (op @ root).reshape(-1)
    gram = vecs @ vecs.conj().T
    return gram.real


def constraint_residuals(problem: MomentProblem, moments: np.ndarray) -> float:
    """Largest violation of the problem's equality rows by a moment matrix."""
    worst = 0.0
    for coeffs, target in problem.equality_constraints:
        val = sum(coeff * moments[problem.rep_cell(mid)] for mid, coeff in coeffs)
        worst = max(worst, abs(val - target))
    for cells in problem.cells_by_id:
        rep_val = moments[cells[0]]
        for cell in cells[1:]:
            worst = max(worst, abs(moments[cell] - rep_val))
    for cell in problem.zero_cells:
        worst = max(worst, abs(moments[cell]))
    return worst


def export_problem(
    strategy_kind: str,
    n_copies: int,
    visibility: float,
    eta: float,
    level: str,
    out_dir: str | Path,
    file_name: str | None = None,
    constrain_long_path: bool = True,
    commute_b1: bool = True,
) -> tuple[Path, Path]:
    """Build, write and describe one problem file; returns (dat-s, sidecar)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategy = build_strategy(strategy_kind, n_copies, eta=eta, visibility=visibility)
    problem = build_problem(strategy, level=level, constrain_long_path=constrain_long_path, commute_b1=commute_b1)
    if file_name is None:
        file_name = (
            f"{strategy_kind}_n{n_copies}_v{visibility:.6f}"
            f"_eta{eta:.10f}_lvl{_level_slug(level)}.dat-s"
        )
    sdpa_path = write_sdpa(problem, out_dir / file_name)
    sidecar = write_sidecar(problem, sdpa_path)
    return sdpa_path, sidecar
