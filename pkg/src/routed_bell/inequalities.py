"""Bell functionals of the routed experiment and their closed-form anchors.

The two functional families share a structure: a product game score between
Alice and the far device, minus a penalty q per click.  Closed forms for the
ideal strategies and for the maximal jointly-measurable value give the
crossing detection efficiency 1/2^N for both families.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .strategies import RoutedCorrelation

__all__ = [
    "TSIRELSON_WIN",
    "CHSH_GRAM_OFFDIAG",
    "PenalizedScore",
    "proven_q_window",
    "chsh_n_score",
    "bb84_n_score",
    "penalized_score",
    "critical_efficiency_closed_form",
]

# Maximal quantum winning probability of the CHSH game.
TSIRELSON_WIN = 0.5 * (1.0 + 1.0 / math.sqrt(2.0))

# Proven off-diagonal bound for the CHSH-family Gram matrices:
# (2 + sqrt(2) + sqrt(4 sqrt(2) - 2)) / 8.
CHSH_GRAM_OFFDIAG = (2.0 + math.sqrt(2.0) + math.sqrt(4.0 * math.sqrt(2.0) - 2.0)) / 8.0

FAMILIES = ("bb84", "chsh")


@dataclass(frozen=True)
class PenalizedScore:
    """Value of a q-penalized functional next to its analytic anchors.

    ``ideal_value`` is the closed form for the honest lossy strategy at the
    correlation's click rate, ``jm_threshold`` the maximal value achievable
    with jointly measurable far-device measurements.  ``window_proven``
    records whether q lies in the range where that threshold is actually
    proven; outside it the threshold is reported but unproven.
    """

    value: float
    q: float
    jm_threshold: float
    ideal_value: float
    n_copies: int
    family: str = "bb84"
    window_proven: bool = True


def proven_q_window(family: str, n_copies: int) -> tuple[float, float]:
    """Penalty range in which the JM threshold is proven.

    BB84 family: [1/sqrt(2), 1].  CHSH family: [alpha^(N-1) beta, alpha^N)
    with the upper endpoint degenerate (zero ideal margin), hence half-open.
    """
    if family == "bb84":
        return (1.0 / math.sqrt(2.0), 1.0)
    if family == "chsh":
        alpha = TSIRELSON_WIN
        return (alpha ** (n_copies - 1) * CHSH_GRAM_OFFDIAG, alpha**n_copies)
    raise ValueError(f"unknown family {family!r}")


def _check_b1_shape(corr: RoutedCorrelation) -> None:
    if corr.n_b1_settings != 2**corr.n_copies:
        raise ValueError(
            f"functional needs {2 ** corr.n_copies} far-device settings, "
            f"correlation has {corr.n_b1_settings}"
        )
    if corr.n_click_outcomes != 2**corr.n_copies:
        raise ValueError("functional needs 2^N click outcomes per setting")


def chsh_n_score(corr: RoutedCorrelation, leg: str = "b0") -> float:
    """N-product CHSH winning probability on the chosen leg.

    The win condition is bitwise x.y = a XOR b per copy; on the long path
    the no-click outcome never satisfies it and contributes zero.
    """
    n = corr.n_copies
    d = 2**n
    if leg not in ("b0", "b1"):
        raise ValueError("leg must be 'b0' or 'b1'")
    table = corr.p_short if leg == "b0" else corr.p_long[:, :, :, :d]
    if table.shape[0] != d or table.shape[1] != d:
        raise ValueError(f"leg {leg} must have {d} settings on both sides")
    idx = np.arange(d)
    x, y, a, b = np.ix_(idx, idx, idx, idx)
    win = (x & y) == (a ^ b)
    return float(table[win].sum() / d**2)


def bb84_n_score(corr: RoutedCorrelation) -> float:
    """N-product BB84 score between Alice and the far device.

    Averages the probability of matching outcomes over the matched-setting
    pairs x = y; no-click contributes zero.
    """
    _check_b1_shape(corr)
    d = 2**corr.n_copies
    total = 0.0
    for s in range(d):
        total += float(np.trace(corr.p_long[s, s, :, :d]))
    return total / d


def penalized_score(corr: RoutedCorrelation, family: str, q: float) -> PenalizedScore:
    """Penalized functional value: base score minus q times the click rate.

    Out-of-window q only warns; the functional itself is defined for any
    q >= 0, only the JM threshold's proof needs the window.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if q < 0:
        raise ValueError("penalty q must be nonnegative")
    _check_b1_shape(corr)
    n = corr.n_copies
    d = 2**n
    alpha_n = TSIRELSON_WIN**n

    base = bb84_n_score(corr) if family == "bb84" else chsh_n_score(corr, leg="b1")
    click_marginal = corr.b1_marginal()[:, :d]
    click_rate = float(click_marginal.sum()) / d  # equals eta for the thinning model
    value = base - q * click_rate

    per_click = 1.0 if family == "bb84" else alpha_n
    lo, hi = proven_q_window(family, n)
    proven = lo - 1e-12 <= q and (q <= hi if family == "bb84" else q < hi)
    if not proven:
        warnings.warn(
            f"q={q} outside the proven window [{lo}, {hi}{']' if family == 'bb84' else ')'} "
            f"for the {family} family; JM threshold reported but unproven",
            stacklevel=2,
        )
    return PenalizedScore(
        value=value,
        q=q,
        jm_threshold=(per_click - q) / d,
        ideal_value=(per_click - q) * click_rate,
        n_copies=n,
        family=family,
        window_proven=proven,
    )


def critical_efficiency_closed_form(family: str, n_copies: int, q: float) -> float:
    """Efficiency where the ideal penalized value meets the JM threshold.

    Solving (c - q) eta = (c - q) / 2^N for eta cancels the penalty and the
    per-click coefficient c, leaving exactly 1/2^N for both families, as
    long as the margin c - q is nonzero.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    per_click = 1.0 if family == "bb84" else TSIRELSON_WIN**n_copies
    if q >= per_click - 1e-15:
        raise ValueError("zero ideal margin")
    return 1.0 / 2**n_copies
