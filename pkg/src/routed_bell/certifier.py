"""Brute-force certification of the jointly-measurable score bounds.

A click pattern assigns to every far-device setting either an outcome or a
no-click; each pattern induces a Hermitian operator whose maximal eigenvalue
caps the penalized score of any joint-measurement model.  This module
enumerates the full (2^N+1)^(2^N) pattern space, computes exact eigenvalues
in bulk, compares them against the analytic Gram bounds, and constructs the
explicit attacks that saturate the thresholds.

The scan is deterministic by construction: the index space is split into
fixed-size chunks (independent of the worker count), every worker computes
per-click-count maxima for its chunks, and the fold merges chunk results in
index order with smallest-index tie-breaking.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .inequalities import TSIRELSON_WIN
from .operators import Operator, psd_sqrt
from .strategies import RoutedCorrelation, RoutedStrategy, ideal_chsh_measurements

__all__ = [
    "ClickPattern",
    "CertificationReport",
    "FAMILIES",
    "all_patterns",
    "pattern_from_index",
    "pattern_to_index",
    "c_operator",
    "scan_click_norms",
    "exhaustive_scan",
    "beta_prime_threshold",
    "gram_bound_scan",
    "build_jm_attack",
    "simulate_jm_model",
]

log = logging.getLogger(__name__)

FAMILIES = ("bb84", "chsh")

# Exact worst-case ||sqrt(S) sqrt(S')|| for two chsh-family single-copy
# operators that share one projector: sqrt((2 + sqrt(3)) / 8) = (1+sqrt(3))/4.
CHSH_SQRT_CROSS = (1.0 + math.sqrt(3.0)) / 4.0

MAX_SCAN_COPIES = 3
PROGRESS_EVERY = 1 << 20
_CHUNK_CAP = 1 << 16

# ---------------------------------------------------------------------------
# Pattern indexing
# ---------------------------------------------------------------------------
#
# Patterns are mixed-radix little-endian integers: digit y (setting index,
# fastest-varying) takes values 0 .. 2^N-1 for a click outcome and 2^N for
# the no-click event.


@dataclass(frozen=True)
class ClickPattern:
    """Outcome-or-no-click assignment for every far-device setting."""

    n_copies: int
    entries: tuple[int | None, ...]

    def __post_init__(self) -> None:
        d = 2**self.n_copies
        if len(self.entries) != d:
            raise ValueError(f"pattern needs {d} entries, got {len(self.entries)}")
        for e in self.entries:
            if e is not None and not 0 <= e < d:
                raise ValueError(f"outcome {e} out of range")

    @property
    def click_count(self) -> int:
        return sum(e is not None for e in self.entries)


def pattern_to_index(pattern: ClickPattern) -> int:
    d = 2**pattern.n_copies
    base = d + 1
    idx = 0
    for y, e in enumerate(pattern.entries):
        idx += (d if e is None else e) * base**y
    return idx


def pattern_from_index(index: int, n_copies: int) -> ClickPattern:
    d = 2**n_copies
    base = d + 1
    entries: list[int | None] = []
    rem = index
    for _ in range(d):
        digit = rem % base
        rem //= base
        entries.append(None if digit == d else digit)
    if rem:
        raise ValueError(f"index {index} out of range for n_copies={n_copies}")
    return ClickPattern(n_copies=n_copies, entries=tuple(entries))


def all_patterns(n_copies: int) -> Iterator[ClickPattern]:
    d = 2**n_copies
    for idx in range((d + 1) ** d):
        yield pattern_from_index(idx, n_copies)


# ---------------------------------------------------------------------------
# Per-pattern operators
# ---------------------------------------------------------------------------

_P_Z = (np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]]))
_P_X = (np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.5, -0.5], [-0.5, 0.5]]))


def _single_copy_effects(family: str) -> np.ndarray:
    """2x2 building blocks, indexed [setting_bit, outcome_bit].

    bb84: the Z/X basis projectors themselves.  chsh: the averaged
    two-dimensional density operators (P_z(b) + P_x(b xor y)) / 2 that arise
    when the setting-averaged far-device score is pushed onto Alice's side.
    """
    out = np.zeros((2, 2, 2, 2), dtype=float)
    for y in range(2):
        for b in range(2):
            if family == "bb84":
                out[y, b] = _P_Z[b] if y == 0 else _P_X[b]
            else:
                out[y, b] = 0.5 * (_P_Z[b] + _P_X[b ^ y])
    return out


def _tensor_le(factors: list[np.ndarray]) -> np.ndarray:
    mat = factors[0]
    for f in factors[1:]:
        mat = np.kron(f, mat)
    return mat


@lru_cache(maxsize=8)
def _term_table(family: str, n_copies: int) -> np.ndarray:
    """Summands per (setting, digit): shape (2^N, 2^N+1, d, d), no-click = 0."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    d = 2**n_copies
    eff = _single_copy_effects(family)
    table = np.zeros((d, d + 1, d, d), dtype=float)
    for y in range(d):
        for b in range(d):
            factors = [eff[(y >> j) & 1, (b >> j) & 1] for j in range(n_copies)]
            table[y, b] = _tensor_le(factors)
    return table


@lru_cache(maxsize=8)
def _sqrt_pair_norm_table(family: str, n_copies: int) -> np.ndarray:
    """||sqrt(S) sqrt(S')|| for every digit pair; factorizes over copies."""
    eff = _single_copy_effects(family)
    roots = np.zeros((2, 2, 2, 2), dtype=float)
    for y in range(2):
        for b in range(2):
            roots[y, b] = psd_sqrt(Operator.from_matrix(eff[y, b], hermitian=True)).entries.real
    pair = np.zeros((2, 2, 2, 2), dtype=float)
    for y1 in range(2):
        for b1 in range(2):
            for y2 in range(2):
                for b2 in range(2):
                    pair[y1, b1, y2, b2] = np.linalg.norm(roots[y1, b1] @ roots[y2, b2], ord=2)
    d = 2**n_copies
    table = np.zeros((d, d + 1, d, d + 1), dtype=float)
    for y1 in range(d):
        for b1 in range(d):
            for y2 in range(d):
                for b2 in range(d):
                    val = 1.0
                    for j in range(n_copies):
                        val *= pair[(y1 >> j) & 1, (b1 >> j) & 1, (y2 >> j) & 1, (b2 >> j) & 1]
                    table[y1, b1, y2, b2] = val
    return table


def c_operator(family: str, pattern: ClickPattern, q: float) -> Operator:
    """Hermitian pattern operator: sum over clicking settings of S - q*identity."""
    table = _term_table(family, pattern.n_copies)
    d = 2**pattern.n_copies
    mat = np.zeros((d, d), dtype=float)
    for y, e in enumerate(pattern.entries):
        if e is not None:
            mat += table[y, e] - q * np.eye(d)
    return Operator.from_matrix(mat, hermitian=True)


# ---------------------------------------------------------------------------
# Exhaustive scan kernel
# ---------------------------------------------------------------------------


def _chunk_exponent(n_copies: int) -> int:
    base = 2**n_copies + 1
    n_settings = 2**n_copies
    s = 1
    while s < n_settings - 1 and base ** (s + 1) <= _CHUNK_CAP:
        s += 1
    return s


@lru_cache(maxsize=8)
def _inner_tables(family: str, n_copies: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[np.ndarray, ...]]:
    """Prefix-sum tables over the fastest-varying digits.

    Returns (summed matrices over digits 0..s-1 flattened to (base^s, d*d),
    click counts, digit matrix (base^s, s), per-click-count index groups).
    """
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    flat = _term_table(family, n_copies).reshape(d, base, d * d)
    clicks_digit = np.array([1] * d + [0], dtype=np.int64)

    sums = flat[0].copy()
    counts = clicks_digit.copy()
    digits = np.arange(base, dtype=np.int64)[:, None]
    for t in range(1, s):
        sums = (flat[t][:, None, :] + sums[None, :, :]).reshape(-1, d * d)
        counts = (clicks_digit[:, None] + counts[None, :]).reshape(-1)
        left = np.repeat(np.arange(base, dtype=np.int64)[:, None], digits.shape[0], axis=0)
        digits = np.hstack([np.tile(digits, (base, 1)), left.reshape(-1, 1)])
    groups = tuple(np.flatnonzero(counts == k) for k in range(s + 1))
    return sums, counts, digits, groups


def _decode_outer(chunk: int, n_copies: int) -> np.ndarray:
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    out = np.empty(d - s, dtype=np.int64)
    rem = chunk
    for t in range(d - s):
        out[t] = rem % base
        rem //= base
    return out


def _outer_sum(flat: np.ndarray, outer: np.ndarray, s: int) -> np.ndarray:
    d = flat.shape[0]
    return flat[s:, :, :][np.arange(d - s), outer].sum(axis=0)


def _scan_chunks(
    family: str,
    n_copies: int,
    chunk_lo: int,
    chunk_hi: int,
    prune: bool,
) -> tuple[np.ndarray, np.ndarray, int, list[list[tuple[float, int]]]]:
    """Per-click-count maxima of ||sum of clicked terms|| over a chunk range.

    Returns (max_norm[k], argmax_index[k], patterns_scanned, candidates);
    entries for click counts not seen in the range hold -inf / -1.  With
    pruning only orbit-minimal patterns are eigendecomposed, and per click
    count every representative within 1e-12 of the running maximum goes on
    the candidate list so the caller can re-evaluate full orbits exactly.
    """
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    flat = _term_table(family, n_copies).reshape(d, base, d * d)
    sums_inner, counts_inner, digits_inner, groups = _inner_tables(family, n_copies)
    perms = _pattern_symmetries(family, n_copies) if prune else ()

    best = np.full(d + 1, -np.inf)
    best_idx = np.full(d + 1, -1, dtype=np.int64)
    cands: list[list[tuple[float, int]]] = [[] for _ in range(d + 1)]
    scanned = 0
    inner_size = base**s
    powers = base ** np.arange(d, dtype=np.int64)

    for chunk in range(chunk_lo, chunk_hi):
        outer = _decode_outer(chunk, n_copies)
        base_mat = _outer_sum(flat, outer, s)
        base_clicks = int(np.sum(outer != d))
        chunk_start = chunk * inner_size

        if perms:
            keep = _prune_mask(digits_inner, outer, chunk_start, powers, perms)
            kept = np.flatnonzero(keep)
            scanned += kept.size
            if kept.size == 0:
                continue
            mats = (sums_inner[kept] + base_mat[None, :]).reshape(-1, d, d)
            lam_kept = np.linalg.eigvalsh(mats)[:, -1]
            lam = np.full(inner_size, -np.inf)
            lam[kept] = lam_kept
        else:
            mats = (sums_inner + base_mat[None, :]).reshape(-1, d, d)
            lam = np.linalg.eigvalsh(mats)[:, -1]
            scanned += inner_size

        for k0, grp in enumerate(groups):
            if grp.size == 0:
                continue
            sub = lam[grp]
            i = int(np.argmax(sub))
            val = float(sub[i])
            if val == -np.inf:
                continue
            k = k0 + base_clicks
            if val > best[k]:
                best[k] = val
                best_idx[k] = chunk_start + int(grp[i])
            if perms:
                near = grp[sub >= best[k] - 1e-12]
                cands[k].extend((float(lam[j]), chunk_start + int(j)) for j in near)
    return best, best_idx, scanned, cands


def _merge(
    acc: tuple[np.ndarray, np.ndarray, int, list],
    new: tuple[np.ndarray, np.ndarray, int, list],
) -> tuple[np.ndarray, np.ndarray, int, list]:
    best, idx, count, cands = acc
    nbest, nidx, ncount, ncands = new
    # tie-break on the pattern index so the fold is associative and the
    # result cannot depend on how chunks were grouped into worker tasks
    take = (nbest > best) | ((nbest == best) & (nidx >= 0) & ((idx < 0) | (nidx < idx)))
    merged_best = np.where(take, nbest, best)
    idx = np.where(take, nidx, idx)
    merged = []
    for k in range(len(cands)):
        pool = cands[k] + ncands[k]
        cutoff = merged_best[k] - 1e-12
        merged.append([c for c in pool if c[0] >= cutoff])
    return merged_best, idx, count + ncount, merged


def _scan_worker(args: tuple[str, int, int, int, bool]) -> tuple[np.ndarray, np.ndarray, int, list]:
    return _scan_chunks(*args)


def _exact_norms(family: str, n_copies: int, indices: np.ndarray) -> np.ndarray:
    """Recompute pattern norms through the identical kernel arithmetic."""
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    flat = _term_table(family, n_copies).reshape(d, base, d * d)
    sums_inner, _, _, _ = _inner_tables(family, n_copies)
    inner_size = base**s
    out = np.empty(len(indices))
    for pos, idx in enumerate(indices):
        chunk, inner = divmod(int(idx), inner_size)
        outer = _decode_outer(chunk, n_copies)
        mat = (sums_inner[inner] + _outer_sum(flat, outer, s)).reshape(d, d)
        out[pos] = np.linalg.eigvalsh(mat)[-1]
    return out


def _orbit_indices(family: str, n_copies: int, index: int) -> np.ndarray:
    """All pattern indices in the symmetry orbit of one pattern."""
    d = 2**n_copies
    base = d + 1
    digits = np.empty(d, dtype=np.int64)
    rem = index
    for y in range(d):
        digits[y] = rem % base
        rem //= base
    powers = base ** np.arange(d, dtype=np.int64)
    members = {index}
    for sigma, tau in _pattern_symmetries(family, n_copies):
        mapped = np.empty(d, dtype=np.int64)
        for y in range(d):
            mapped[sigma[y]] = tau[y][digits[y]]
        members.add(int(mapped @ powers))
    return np.array(sorted(members), dtype=np.int64)


def _refine_pruned(
    family: str,
    n_copies: int,
    best: np.ndarray,
    best_idx: np.ndarray,
    cands: list[list[tuple[float, int]]],
) -> tuple[np.ndarray, np.ndarray]:
    """Replace per-class representatives by exact orbit extrema.

    The representative values of two equivalent patterns agree only up to
    eigensolver noise; re-evaluating every member of the candidate classes
    through the same arithmetic restores bit-equality with the full scan.
    """
    out_best = best.copy()
    out_idx = best_idx.copy()
    for k, pool in enumerate(cands):
        if not pool:
            continue
        member_ids = set()
        for _, rep_idx in pool:
            member_ids.update(_orbit_indices(family, n_copies, rep_idx).tolist())
        ids = np.array(sorted(member_ids), dtype=np.int64)
        vals = _exact_norms(family, n_copies, ids)
        top = float(vals.max())
        out_best[k] = top
        out_idx[k] = int(ids[np.flatnonzero(vals == top)[0]])
    return out_best, out_idx


_scan_cache: dict[tuple, tuple[np.ndarray, np.ndarray, int, float]] = {}


def scan_click_norms(
    family: str,
    n_copies: int,
    workers: int = 1,
    prune: bool = False,
    progress: bool = False,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Scan the whole pattern space and fold per-click-count norm maxima.

    Returns (max_norm[k], argmax_pattern_index[k], patterns_scanned,
    wall_time_seconds) for k = 0 .. 2^N.  Every penalty-parameter query
    (penalized maxima, window thresholds) is a function of these arrays,
    since the penalty -k*q is constant within a click count.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if n_copies > MAX_SCAN_COPIES:
        raise ValueError("pattern space too large")
    workers = max(1, workers if workers > 0 else os.cpu_count() or 1)
    key = (family, n_copies, workers, prune)
    if key in _scan_cache:
        best, idx, scanned, wall = _scan_cache[key]
        return best.copy(), idx.copy(), scanned, wall

    t0 = time.perf_counter()
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    n_chunks = base ** (d - s)
    inner_size = base**s

    acc: tuple[np.ndarray, np.ndarray, int, list] = (
        np.full(d + 1, -np.inf),
        np.full(d + 1, -1, dtype=np.int64),
        0,
        [[] for _ in range(d + 1)],
    )
    if workers == 1:
        next_report = PROGRESS_EVERY
        for chunk in range(n_chunks):
            acc = _merge(acc, _scan_chunks(family, n_copies, chunk, chunk + 1, prune))
            done = (chunk + 1) * inner_size
            if progress and done >= next_report:
                log.info("scan progress: %d / %d patterns", done, n_chunks * inner_size)
                next_report += PROGRESS_EVERY
    else:
        span = max(1, n_chunks // (workers * 8))
        tasks = [
            (family, n_copies, lo, min(lo + span, n_chunks), prune)
            for lo in range(0, n_chunks, span)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_scan_worker, tasks):
                acc = _merge(acc, part)

    best, best_idx, scanned, cands = acc
    if prune:
        best, best_idx = _refine_pruned(family, n_copies, best, best_idx, cands)
    result = (best, best_idx, scanned, time.perf_counter() - t0)
    _scan_cache[key] = result
    return result


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of one exhaustive scan at a fixed penalty."""

    family: str
    n_copies: int
    q: float
    max_lambda: float
    argmax_pattern: ClickPattern
    patterns_scanned: int
    bound_rhs: float
    verified: bool
    wall_time: float
    workers: int = 1
    prune: bool = False

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_copies": self.n_copies,
            "q": self.q,
            "max_lambda": self.max_lambda,
            "argmax_pattern": list(self.argmax_pattern.entries),
            "patterns_scanned": self.patterns_scanned,
            "bound_rhs": self.bound_rhs,
            "verified": self.verified,
            "wall_time_s": self.wall_time,
            "workers": self.workers,
            "prune": self.prune,
        }


def exhaustive_scan(
    family: str,
    n_copies: int,
    q: float,
    workers: int = 1,
    prune: bool = False,
    progress: bool = False,
) -> CertificationReport:
    """Maximize the pattern-operator eigenvalue over the whole pattern space.

    verified means the maximum stays at or below the single-click value that
    the analytic bound promises (1-q per click for bb84, alpha^N-q for chsh),
    within 1e-9.
    """
    if q < 0:
        raise ValueError("penalty q must be nonnegative")
    t0 = time.perf_counter()
    best, best_idx, scanned, _ = scan_click_norms(family, n_copies, workers=workers, prune=prune, progress=progress)
    ks = np.arange(best.size)
    scores = np.where(np.isfinite(best), best - q * ks, -np.inf)
    max_lambda = float(scores.max())
    # smallest pattern index among click counts achieving the maximum
    tied = np.flatnonzero(scores >= max_lambda)
    arg_index = int(min(best_idx[k] for k in tied))
    bound_rhs = (1.0 - q) if family == "bb84" else TSIRELSON_WIN**n_copies - q
    report = CertificationReport(
        family=family,
        n_copies=n_copies,
        q=q,
        max_lambda=max_lambda,
        argmax_pattern=pattern_from_index(arg_index, n_copies),
        patterns_scanned=scanned,
        bound_rhs=bound_rhs,
        verified=bool(max_lambda <= bound_rhs + 1e-9),
        wall_time=time.perf_counter() - t0,
        workers=workers,
        prune=prune,
    )
    return report


def beta_prime_threshold(n_copies: int, workers: int = 1) -> float:
    """Smallest penalty at which no multi-click pattern beats a single click.

    Computed as the maximum over patterns with k >= 2 clicks of
    (||sum of clicked terms|| - alpha^N) / (k - 1), i.e. the exact crossing
    point of the k-click score with the 1-click score.
    """
    best, _, _, _ = scan_click_norms("chsh", n_copies, workers=workers)
    alpha_n = TSIRELSON_WIN**n_copies
    candidates = [
        (best[k] - alpha_n) / (k - 1)
        for k in range(2, best.size)
        if np.isfinite(best[k])
    ]
    if not candidates:
        raise ValueError("no multi-click patterns at this size")
    return float(max(candidates))


def gram_bound_scan(family: str, n_copies: int, q: float = 0.0, workers: int = 1) -> dict[int, tuple[float, float]]:
    """Worst norm-Gram bound per click count, next to the analytic value.

    The Gram matrix of a pattern collects pairwise norms of square roots of
    its clicked terms; its operator norm upper-bounds the true sum norm and
    is itself dominated by the analytic rank-one-perturbation value.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if n_copies > MAX_SCAN_COPIES:
        raise ValueError("pattern space too large")
    del q  # the Gram bound is penalty-free; kept for interface symmetry
    d = 2**n_copies
    base = d + 1
    s = _chunk_exponent(n_copies)
    pair = _sqrt_pair_norm_table(family, n_copies)
    _, counts_inner, digits_inner, _ = _inner_tables(family, n_copies)
    n_chunks = base ** (d - s)

    worst = np.full(d + 1, -np.inf)
    ii = np.arange(d)[None, :, None]
    jj = np.arange(d)[None, None, :]
    for chunk in range(n_chunks):
        outer = _decode_outer(chunk, n_copies)
        digits = np.hstack([digits_inner, np.tile(outer, (digits_inner.shape[0], 1))])
        gram = pair[ii, digits[:, :, None], jj, digits[:, None, :]]
        lam = np.linalg.eigvalsh(gram)[:, -1]
        ks = counts_inner + int(np.sum(outer != d))
        np.maximum.at(worst, ks, lam)

    alpha = TSIRELSON_WIN
    out: dict[int, tuple[float, float]] = {}
    for k in range(1, d + 1):
        if family == "bb84":
            analytic = (1.0 - 1.0 / math.sqrt(2.0)) + k / math.sqrt(2.0)
        else:
            analytic = alpha**n_copies + (k - 1) * alpha ** (n_copies - 1) * CHSH_SQRT_CROSS
        out[k] = (float(worst[k]), analytic)
    return out


# ---------------------------------------------------------------------------
# Symmetry pruning
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _pattern_symmetries(family: str, n_copies: int) -> tuple[tuple[tuple[int, ...], tuple[tuple[int, ...], ...]], ...]:
    """Pattern permutations that leave the term multiset invariant.

    Derived numerically: per-copy conjugations by X, Z and the basis swap
    are kept only if they permute the single-copy effect family, then lifted
    to (setting permutation, per-setting outcome relabeling) pairs on the
    full pattern space.  The identity is excluded.
    """
    eff = _single_copy_effects(family)
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    candidates = [
        np.array([[0.0, 1.0], [1.0, 0.0]]),
        np.array([[1.0, 0.0], [0.0, -1.0]]),
        hadamard,
    ]
    single_maps: set[tuple[int, ...]] = {tuple(range(4))}
    frontier: list[tuple[int, ...]] = []
    for u in candidates:
        mapping = []
        for y in range(2):
            for b in range(2):
                img = u @ eff[y, b] @ u.conj().T
                hit = None
                for y2 in range(2):
                    for b2 in range(2):
                        if np.allclose(img, eff[y2, b2], atol=1e-12):
                            hit = 2 * y2 + b2
                if hit is None:
                    mapping = []
                    break
                mapping.append(hit)
            if not mapping:
                break
        if mapping:
            m = tuple(mapping)
            if m not in single_maps:
                single_maps.add(m)
                frontier.append(m)
    # close under composition
    while frontier:
        m1 = frontier.pop()
        for m2 in list(single_maps):
            for comp in (tuple(m1[i] for i in m2), tuple(m2[i] for i in m1)):
                if comp not in single_maps:
                    single_maps.add(comp)
                    frontier.append(comp)
    per_copy = sorted(single_maps)
    # measurements map to measurements, so the setting component is outcome-free
    for m in per_copy:
        assert m[0] // 2 == m[1] // 2 and m[2] // 2 == m[3] // 2

    d = 2**n_copies
    elements = []
    for combo_index in range(len(per_copy) ** n_copies):
        rem = combo_index
        combo = []
        for _ in range(n_copies):
            combo.append(per_copy[rem % len(per_copy)])
            rem //= len(per_copy)
        sigma = []
        tau = []
        for y in range(d):
            y_img = 0
            for j in range(n_copies):
                y_img |= (combo[j][2 * ((y >> j) & 1)] // 2) << j
            sigma.append(y_img)
            row = []
            for b in range(d):
                b_img = 0
                for j in range(n_copies):
                    b_img |= (combo[j][2 * ((y >> j) & 1) + ((b >> j) & 1)] % 2) << j
                row.append(b_img)
            row.append(d)  # no-click maps to no-click
            tau.append(tuple(row))
        element = (tuple(sigma), tuple(tau))
        if element != (tuple(range(d)), tuple(tuple(list(range(d)) + [d]) for _ in range(d))):
            elements.append(element)
    return tuple(elements)


def _prune_mask(
    digits_inner: np.ndarray,
    outer: np.ndarray,
    chunk_start: int,
    powers: np.ndarray,
    perms: tuple,
) -> np.ndarray:
    """Keep only patterns that are the smallest index in their orbit."""
    n_inner = digits_inner.shape[0]
    digits = np.hstack([digits_inner, np.tile(outer, (n_inner, 1))])
    own = chunk_start + np.arange(n_inner, dtype=np.int64)
    keep = np.ones(n_inner, dtype=bool)
    for sigma, tau in perms:
        tau_arr = np.asarray(tau, dtype=np.int64)
        mapped = tau_arr[np.arange(digits.shape[1])[None, :], digits]
        permuted = np.empty_like(digits)
        permuted[:, np.asarray(sigma, dtype=np.int64)] = mapped
        keep &= (permuted @ powers) >= own
    return keep


# ---------------------------------------------------------------------------
# Saturating attacks
# ---------------------------------------------------------------------------


def build_jm_attack(family: str, n_copies: int, designated_setting: int = 0) -> dict[ClickPattern, Operator]:
    """Single-setting parent measurement that saturates the JM threshold.

    Eve performs the honest far-device measurement for one designated
    setting and reports no-click for every other setting; the returned
    effects sum to the identity.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if n_copies > MAX_SCAN_COPIES:
        raise ValueError("pattern space too large")
    alice, bob = ideal_chsh_measurements(n_copies)
    assembly = alice if family == "bb84" else bob
    d = 2**n_copies
    parent: dict[ClickPattern, Operator] = {}
    for b in range(d):
        entries: list[int | None] = [None] * d
        entries[designated_setting] = b
        parent[ClickPattern(n_copies=n_copies, entries=tuple(entries))] = assembly.effects[(designated_setting, b)]
    return parent


def simulate_jm_model(strategy: RoutedStrategy, parent: dict[ClickPattern, Operator]) -> RoutedCorrelation:
    """Correlation produced when Eve runs a parent measurement on the long path.

    The short path stays honest; the long-path table is assembled from the
    parent outcomes by reading off the designated setting's entry.
    """
    d_b = strategy.b1.dim
    if strategy.b1.n_settings != 2**strategy.n_copies:
        raise ValueError("parent patterns enumerate 2^N settings; strategy has a different count")
    total = np.zeros((d_b, d_b), dtype=complex)
    for op in parent.values():
        if np.linalg.eigvalsh(op.entries)[0] < -1e-10:
            raise ValueError("parent effects must be PSD")
        total += op.entries
    if not np.allclose(total, np.eye(d_b), atol=1e-10, rtol=0.0):
        raise ValueError("incomplete parent POVM")

    d_a = 2**strategy.n_copies
    rho = strategy.state.entries.reshape(d_a, d_b, d_a, d_b)
    a_eff = strategy.alice.as_array()
    effs = np.stack([op.entries for op in parent.values()])
    joint = np.einsum("ikjl,xaji,plk->xap", rho, a_eff, effs, optimize=True).real

    n_y1 = strategy.b1.n_settings
    n_b1 = strategy.b1.outcomes_per_setting
    p1 = np.zeros((a_eff.shape[0], n_y1, a_eff.shape[1], n_b1 + 1), dtype=float)
    for p_idx, pattern in enumerate(parent.keys()):
        for y, e in enumerate(pattern.entries[:n_y1]):
            col = n_b1 if e is None else e
            p1[:, y, :, col] += joint[:, :, p_idx]

    p0 = np.einsum(
        "ikjl,xaji,yblk->xyab",
        rho,
        a_eff,
        strategy.b0.as_array(),
        optimize=True,
    ).real
    return RoutedCorrelation(n_copies=strategy.n_copies, p_short=p0, p_long=p1, eta=None)
