"""Pattern scan engine: operators, exhaustive maxima, pruning, attacks."""

import math

import numpy as np
import pytest

from routed_bell.certifier import (
    CHSH_SQRT_CROSS,
    ClickPattern,
    all_patterns,
    beta_prime_threshold,
    build_jm_attack,
    c_operator,
    exhaustive_scan,
    gram_bound_scan,
    pattern_from_index,
    pattern_to_index,
    scan_click_norms,
    simulate_jm_model,
    _pattern_symmetries,
    _term_table,
)
from routed_bell.inequalities import CHSH_GRAM_OFFDIAG, TSIRELSON_WIN, penalized_score
from routed_bell.operators import Operator, gram_norm_bound, max_eigenvalue
from routed_bell.strategies import build_strategy

INV_SQRT2 = 1.0 / math.sqrt(2.0)
BETA_PRIME = (4.0 - math.sqrt(2.0)) / 4.0  # exhaustive-search-tight penalty coefficient


def test_pattern_index_roundtrip():
    for n in (1, 2):
        count = (2**n + 1) ** (2**n)
        for idx in range(0, count, 7):
            p = pattern_from_index(idx, n)
            assert pattern_to_index(p) == idx
    assert pattern_from_index(0, 1).entries == (0, 0)
    assert pattern_from_index(8, 1).entries == (None, None)


def test_pattern_validation():
    with pytest.raises(ValueError):
        ClickPattern(n_copies=1, entries=(0,))
    with pytest.raises(ValueError):
        ClickPattern(n_copies=1, entries=(0, 5))


def test_c_operator_empty_pattern_is_zero():
    p = ClickPattern(n_copies=1, entries=(None, None))
    for fam in ("bb84", "chsh"):
        assert np.allclose(c_operator(fam, p, 0.9).entries, 0.0)


def test_c_operator_single_click_bb84():
    p = ClickPattern(n_copies=1, entries=(0, None))
    op = c_operator("bb84", p, INV_SQRT2)
    expected = np.diag([1.0, 0.0]) - INV_SQRT2 * np.eye(2)
    assert np.allclose(op.entries, expected, atol=1e-15)
    assert max_eigenvalue(op) == pytest.approx(1 - INV_SQRT2, abs=1e-12)


def test_c_operator_single_click_chsh():
    p = ClickPattern(n_copies=1, entries=(0, None))
    op = c_operator("chsh", p, 0.0)
    assert max_eigenvalue(op) == pytest.approx(TSIRELSON_WIN, abs=1e-12)


def test_scan_bb84_n1():
    report = exhaustive_scan("bb84", 1, INV_SQRT2)
    assert report.patterns_scanned == 9
    assert report.max_lambda == pytest.approx(1 - INV_SQRT2, abs=1e-12)
    assert report.verified
    assert report.bound_rhs == pytest.approx(1 - INV_SQRT2, abs=1e-15)


def test_scan_bb84_n2():
    report = exhaustive_scan("bb84", 2, INV_SQRT2)
    assert report.patterns_scanned == 625
    assert report.max_lambda == pytest.approx(1 - INV_SQRT2, abs=1e-9)
    assert report.verified


def test_scan_bb84_below_window_fails():
    report = exhaustive_scan("bb84", 1, INV_SQRT2 - 0.01)
    assert not report.verified
    # the two-click pattern binds: 1 + 1/sqrt2 - 2q
    assert report.max_lambda == pytest.approx(1 + INV_SQRT2 - 2 * (INV_SQRT2 - 0.01), abs=1e-12)


def test_scan_bb84_window_grid():
    for q in (INV_SQRT2, 0.75, 0.9, 1.0):
        for n in (1, 2):
            assert exhaustive_scan("bb84", n, q).verified


def test_scan_chsh_two_click_counterexample():
    report = exhaustive_scan("chsh", 1, 0.64)
    assert not report.verified
    assert report.max_lambda == pytest.approx(1.5 - 2 * 0.64, abs=1e-12)
    assert report.argmax_pattern.click_count == 2


def test_scan_chsh_window_flips():
    for n in (1, 2):
        scale = TSIRELSON_WIN ** (n - 1)
        assert exhaustive_scan("chsh", n, scale * CHSH_GRAM_OFFDIAG).verified
        assert exhaustive_scan("chsh", n, scale * BETA_PRIME + 1e-4).verified
        assert not exhaustive_scan("chsh", n, scale * BETA_PRIME - 1e-4).verified


def test_beta_prime_threshold_small_n():
    assert beta_prime_threshold(1) == pytest.approx(BETA_PRIME, abs=1e-12)
    assert beta_prime_threshold(2) / TSIRELSON_WIN == pytest.approx(BETA_PRIME, abs=1e-12)


def test_scan_rejects_large_n_and_negative_q():
    with pytest.raises(ValueError, match="pattern space too large"):
        exhaustive_scan("bb84", 4, 0.8)
    with pytest.raises(ValueError):
        exhaustive_scan("bb84", 1, -0.1)


def test_scan_deterministic_across_workers_and_prune():
    for fam, n, q in [("bb84", 1, INV_SQRT2), ("bb84", 2, 0.8), ("chsh", 2, 0.62)]:
        reports = [
            exhaustive_scan(fam, n, q, workers=w, prune=p)
            for w, p in [(1, False), (2, False), (4, False), (1, True)]
        ]
        base = reports[0]
        for rep in reports[1:]:
            assert rep.max_lambda == base.max_lambda
            assert rep.argmax_pattern == base.argmax_pattern
            assert rep.verified == base.verified
        assert reports[0].patterns_scanned == (2**n + 1) ** (2**n)
        assert reports[3].patterns_scanned < base.patterns_scanned  # pruning skips orbits


def test_symmetries_preserve_spectra():
    for fam in ("bb84", "chsh"):
        perms = _pattern_symmetries(fam, 1)
        assert perms  # at least one nontrivial symmetry exists
        for sigma, tau in perms:
            for p in all_patterns(1):
                mapped_entries = [None] * 2
                for y, e in enumerate(p.entries):
                    mapped_entries[sigma[y]] = None if e is None else tau[y][e]
                q = ClickPattern(n_copies=1, entries=tuple(mapped_entries))
                ev1 = np.linalg.eigvalsh(c_operator(fam, p, 0.3).entries)
                ev2 = np.linalg.eigvalsh(c_operator(fam, q, 0.3).entries)
                assert np.allclose(ev1, ev2, atol=1e-12)


def test_gram_bounds_dominate():
    for fam in ("bb84", "chsh"):
        for n in (1, 2):
            for k, (gram, analytic) in gram_bound_scan(fam, n).items():
                assert gram <= analytic + 1e-9, (fam, n, k)


def test_gram_chain_per_pattern_n1():
    # true norm <= pattern Gram bound <= analytic, for every pattern
    for fam in ("bb84", "chsh"):
        table = _term_table(fam, 1)
        per_k = gram_bound_scan(fam, 1)
        for p in all_patterns(1):
            if p.click_count == 0:
                continue
            terms = [
                Operator.from_matrix(table[y, e], hermitian=True)
                for y, e in enumerate(p.entries)
                if e is not None
            ]
            _, bound = gram_norm_bound(terms)
            true_norm = max_eigenvalue(c_operator(fam, p, 0.0))
            assert true_norm <= bound + 1e-9
            assert bound <= per_k[p.click_count][1] + 1e-9


def test_gram_analytic_values():
    per_k = gram_bound_scan("bb84", 1)
    assert per_k[2][1] == pytest.approx(1 + INV_SQRT2, abs=1e-12)
    per_k_chsh = gram_bound_scan("chsh", 1)
    assert per_k_chsh[2][1] == pytest.approx(TSIRELSON_WIN + CHSH_SQRT_CROSS, abs=1e-12)
    assert per_k_chsh[1][0] == pytest.approx(TSIRELSON_WIN, abs=1e-12)  # 1x1 Gram = ||S||


def test_attack_effects_complete():
    for fam, n in [("bb84", 1), ("bb84", 2), ("chsh", 1)]:
        parent = build_jm_attack(fam, n)
        total = sum(op.entries for op in parent.values())
        assert np.allclose(total, np.eye(2**n), atol=1e-12)
        for pattern in parent:
            assert pattern.click_count == 1
            assert pattern.entries[0] is not None  # designated setting zero


def test_attack_saturates_thresholds():
    cases = [
        ("bb84", "rbb84", 1, INV_SQRT2),
        ("bb84", "rbb84", 2, INV_SQRT2),
        ("chsh", "rchsh", 1, CHSH_GRAM_OFFDIAG),
        ("chsh", "rchsh", 2, TSIRELSON_WIN * CHSH_GRAM_OFFDIAG),
    ]
    for fam, kind, n, q in cases:
        strategy = build_strategy(kind, n, eta=1.0, visibility=1.0)
        corr = simulate_jm_model(strategy, build_jm_attack(fam, n))
        score = penalized_score(corr, fam, q)
        assert abs(score.value - score.jm_threshold) <= 1e-12


def test_simulate_always_noclick_parent():
    strategy = build_strategy("rbb84", 1, eta=1.0, visibility=1.0)
    parent = {ClickPattern(n_copies=1, entries=(None, None)): Operator.identity(2)}
    corr = simulate_jm_model(strategy, parent)
    assert np.allclose(corr.p_long[:, :, :, -1].sum(axis=2), 1.0, atol=1e-12)
    corr.validate()


def test_simulate_rejects_incomplete_parent():
    strategy = build_strategy("rbb84", 1, eta=1.0, visibility=1.0)
    parent = {ClickPattern(n_copies=1, entries=(0, None)): Operator.projector(np.array([1.0, 0.0]))}
    with pytest.raises(ValueError, match="incomplete parent POVM"):
        simulate_jm_model(strategy, parent)


def _random_parent(rng, n):
    d = 2**n
    n_patterns = (d + 1) ** d
    k = int(rng.integers(2, 6))
    raws = []
    for _ in range(k):
        m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        raws.append(m @ m.conj().T)
    total = sum(raws)
    w, v = np.linalg.eigh(total)
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    indices = rng.choice(n_patterns, size=k, replace=False)
    parent = {}
    for idx, raw in zip(indices, raws):
        pattern = pattern_from_index(int(idx), n)
        eff = inv_root @ raw @ inv_root
        parent[pattern] = Operator.from_matrix(eff, hermitian=True)
    return parent


@pytest.mark.parametrize("n", [1, 2])
def test_random_jm_models_never_beat_thresholds(n):
    rng = np.random.default_rng(42 + n)
    strategies = {
        "bb84": build_strategy("rbb84", n, eta=1.0, visibility=1.0),
        "chsh": build_strategy("rchsh", n, eta=1.0, visibility=1.0),
    }
    qs = {"bb84": INV_SQRT2, "chsh": TSIRELSON_WIN ** (n - 1) * CHSH_GRAM_OFFDIAG}
    for _ in range(25):
        parent = _random_parent(rng, n)
        for fam in ("bb84", "chsh"):
            corr = simulate_jm_model(strategies[fam], parent)
            score = penalized_score(corr, fam, qs[fam])
            assert score.value <= score.jm_threshold + 1e-9


def test_scan_cache_returns_copies():
    best1, idx1, _, _ = scan_click_norms("bb84", 1)
    best1[0] = 123.0
    best2, _, _, _ = scan_click_norms("bb84", 1)
    assert best2[0] != 123.0
