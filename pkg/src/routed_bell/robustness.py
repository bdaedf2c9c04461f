"""Robust detection-efficiency thresholds from approximate self-testing.

When the near devices witness the product-CHSH score only up to a gap
epsilon, the remotely prepared states are known only up to an error
delta that grows with the self-testing error f(N, epsilon).  Shifting the
penalty by sqrt(delta) restores a click-count-independent bound, at the
price of a larger critical efficiency.

f(N, epsilon) is deliberately a user input: no concrete robust self-testing
constant is assumed, and every output records the f it was computed from.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

__all__ = [
    "RobustnessInput",
    "delta_bound",
    "robust_eta_star",
    "robust_gram_bound",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_ALPHA = 0.5 * (1.0 + _INV_SQRT2)


@dataclass(frozen=True)
class RobustnessInput:
    """Self-testing error budget for the robust threshold formulas."""

    n_copies: int
    epsilon: float = 0.0
    f_value: float = 0.0
    linear_translation: bool = False

    def __post_init__(self) -> None:
        if self.n_copies < 1:
            raise ValueError("n_copies must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.f_value < 0:
            raise ValueError("negative self-testing error")
        if self.epsilon == 0.0 and self.f_value != 0.0:
            warnings.warn("epsilon = 0 but f_value != 0; expected f(N, 0) = 0", stacklevel=2)


def delta_bound(inp: RobustnessInput) -> float:
    """Worst-case perturbation of the remotely prepared states.

    delta = 2^(2N+1) (f^2 + 2f) + 2^(4N) (f^2 + 2f)^2 with f = f(N, epsilon).
    """
    f = inp.f_value
    if f < 0:
        raise ValueError("negative self-testing error")
    n = inp.n_copies
    g = f * f + 2.0 * f
    return 2.0 ** (2 * n + 1) * g + 2.0 ** (4 * n) * g * g


def robust_eta_star(inp: RobustnessInput, delta: float | None = None) -> tuple[float, float]:
    """Shifted penalty and critical efficiency under the error budget.

    Returns (q, eta_star) with q = 1/sqrt(2) + sqrt(delta).  With
    ``linear_translation`` the Bell gap epsilon additionally eats into the
    score margin as epsilon / alpha^N.  ``delta`` may be supplied directly
    (e.g. by a tighter analysis); by default it is the delta_bound value.
    """
    if delta is None:
        delta = delta_bound(inp)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    root = math.sqrt(delta)
    q = _INV_SQRT2 + root
    margin = 1.0 - _INV_SQRT2 - root
    if inp.linear_translation:
        margin -= inp.epsilon / _ALPHA**inp.n_copies
    if margin <= 0.0:
        raise ValueError("robustness window empty")
    eta_star = (1.0 - _INV_SQRT2) / margin / 2**inp.n_copies
    return q, eta_star


def robust_gram_bound(n_copies: int, k: int, delta: float, q: float) -> float:
    """Penalized k-click Gram bound with the delta-inflated off-diagonal.

    (1 - 1/sqrt(2)) + k (1/sqrt(2) + sqrt(delta)) - k q; constant in k
    exactly when q absorbs the inflation, q = 1/sqrt(2) + sqrt(delta).
    """
    if k < 1:
        raise ValueError("click count must be at least 1")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    del n_copies  # the bound is dimension-free; kept for interface symmetry
    return (1.0 - _INV_SQRT2) + k * (_INV_SQRT2 + math.sqrt(delta)) - k * q
