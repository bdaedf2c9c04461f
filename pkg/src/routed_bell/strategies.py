"""Concrete routed-Bell strategies, imperfection models and Born-rule tables.

Settings and outcomes are N-bit strings packed little-endian into integers
(bit j of the integer is copy j), and tensor factors are ordered so copy 0
is the least significant index.  The short path (i=0) routes Bob's system to
the near device, the long path (i=1) to the lossy far device whose no-click
event is the trailing outcome column of the long-path table.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import Operator, pauli

__all__ = [
    "MeasurementAssembly",
    "RoutedStrategy",
    "RoutedCorrelation",
    "STRATEGY_KINDS",
    "ideal_chsh_measurements",
    "build_strategy",
    "correlation",
    "conditional_states",
    "maximally_entangled_state",
]

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("rbb84", "rchsh", "rbb84chsh")

COMPLETENESS_ATOL = 1e-12
PSD_ATOL = 1e-10
TABLE_ATOL = 1e-10


def _bit(value: int, j: int) -> int:
    return (value >> j) & 1


def _tensor_le(factors: list[np.ndarray]) -> np.ndarray:
    """Kronecker product with factor 0 as the least significant index."""
    mat = factors[0]
    for f in factors[1:]:
        mat = np.kron(f, mat)
    return mat


@dataclass(frozen=True)
class MeasurementAssembly:
    """A family of POVMs, one per setting, with a common outcome count.

    Invariants enforced at construction: effects are PSD within 1e-10 and
    sum to the identity within 1e-12 for every setting.
    """

    n_settings: int
    outcomes_per_setting: int
    effects: dict[tuple[int, int], Operator]

    def __post_init__(self) -> None:
        if self.n_settings < 1 or self.outcomes_per_setting < 1:
            raise ValueError("need at least one setting and one outcome")
        dim = self.effects[(0, 0)].dim
        eye = np.eye(dim, dtype=complex)
        for s in range(self.n_settings):
            total = np.zeros((dim, dim), dtype=complex)
            for o in range(self.outcomes_per_setting):
                op = self.effects[(s, o)]
                if op.dim != dim:
                    raise ValueError("all effects must share one dimension")
                if np.linalg.eigvalsh(op.entries)[0] < -PSD_ATOL:
                    raise ValueError(f"effect ({s},{o}) is not PSD")
                total += op.entries
            if not np.allclose(total, eye, atol=COMPLETENESS_ATOL, rtol=0.0):
                raise ValueError(f"effects of setting {s} do not sum to identity")

    @property
    def dim(self) -> int:
        return self.effects[(0, 0)].dim

    def as_array(self) -> np.ndarray:
        """Stacked effects with shape (n_settings, outcomes, dim, dim)."""
        d = self.dim
        out = np.empty((self.n_settings, self.outcomes_per_setting, d, d), dtype=complex)
        for (s, o), op in self.effects.items():
            out[s, o] = op.entries
        return out


@dataclass(frozen=True)
class RoutedStrategy:
    """Shared state, the three measurement assemblies, and the noise knobs."""

    n_copies: int
    state: Operator
    alice: MeasurementAssembly
    b0: MeasurementAssembly
    b1: MeasurementAssembly
    eta: float
    visibility: float
    kind: str = "custom"

    def __post_init__(self) -> None:
        n = self.n_copies
        if self.state.dim != 4**n:
            raise ValueError(f"state must act on dimension {4 ** n}")
        if abs(self.state.trace().real - 1.0) > 1e-12 or abs(self.state.trace().imag) > 1e-12:
            raise ValueError("state must have unit trace")
        if np.linalg.eigvalsh(self.state.entries)[0] < -PSD_ATOL:
            raise ValueError("state must be PSD")
        if self.alice.n_settings != 2**n or self.alice.outcomes_per_setting != 2**n:
            raise ValueError("Alice needs 2^N settings with 2^N outcomes")
        if self.b0.n_settings != 2**n or self.b0.outcomes_per_setting != 2**n:
            raise ValueError("B0 needs 2^N settings with 2^N outcomes")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")


@dataclass(frozen=True)
class RoutedCorrelation:
    """Dense probability tables for both paths.

    ``p_short[x, y, a, b]`` is the i=0 table; ``p_long[x, y, a, b]`` is the
    i=1 table whose final b index is the no-click outcome.  ``eta`` records
    the uniform click probability when the table came from the thinning
    model (None for e.g. simulated joint-measurement models, whose click
    rates may legitimately depend on the setting).
    """

    n_copies: int
    p_short: np.ndarray = field(repr=False)
    p_long: np.ndarray = field(repr=False)
    eta: float | None = None

    def __post_init__(self) -> None:
        for name in ("p_short", "p_long"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_b1_settings(self) -> int:
        return self.p_long.shape[1]

    @property
    def n_click_outcomes(self) -> int:
        return self.p_long.shape[3] - 1

    def alice_marginal_short(self) -> np.ndarray:
        """p_A(a | x) from the short path, averaged over y for noise robustness."""
        return self.p_short.sum(axis=3).mean(axis=1)

    def b1_marginal(self) -> np.ndarray:
        """p_B(b | y, i=1) including the no-click column, averaged over x."""
        return self.p_long.sum(axis=2).mean(axis=0)

    def validate(self, atol: float = TABLE_ATOL) -> None:
        """Check normalization, positivity and no-signaling of both tables."""
        for arr in (self.p_short, self.p_long):
            if arr.min() < -atol or arr.max() > 1.0 + atol:
                raise ValueError("probabilities outside [0, 1]")
            sums = arr.sum(axis=(2, 3))
            if not np.allclose(sums, 1.0, atol=atol, rtol=0.0):
                raise ValueError("a conditional slice does not sum to 1")
            marg_a = arr.sum(axis=3)
            if not np.allclose(marg_a, marg_a[:, :1, :], atol=atol, rtol=0.0):
                raise ValueError("Alice's marginal depends on Bob's setting")
        short_a = self.p_short.sum(axis=3).mean(axis=1)
        long_a = self.p_long.sum(axis=3).mean(axis=1)
        if not np.allclose(short_a, long_a, atol=atol, rtol=0.0):
            raise ValueError("Alice's marginal depends on the path bit")
        if self.eta is not None:
            clicks = self.p_long[:, :, :, :-1].sum(axis=(2, 3))
            if not np.allclose(clicks, self.eta, atol=atol, rtol=0.0):
                raise ValueError("click probability is not uniformly eta")


def maximally_entangled_state(n_copies: int) -> np.ndarray:
    """N pairs of maximally entangled qubits, regrouped as H_A (x) H_B."""
    d = 2**n_copies
    vec = np.zeros(d * d, dtype=complex)
    vec[np.arange(d) * d + np.arange(d)] = 1.0 / math.sqrt(d)
    return np.outer(vec, vec.conj())


def _qubit_effect_alice(x: int, a: int) -> np.ndarray:
    obs = pauli("Z") if x == 0 else pauli("X")
    return 0.5 * (np.eye(2, dtype=complex) + (-1) ** a * obs.entries)


def _qubit_effect_bob(y: int, b: int) -> np.ndarray:
    # (Z + X)/sqrt2 for y=0 and (Z - X)/sqrt2 for y=1: the outcome labeling
    # that wins x.y = a xor b with probability alpha on every setting pair
    xz = pauli("Z").entries + pauli("X").entries if y == 0 else pauli("Z").entries - pauli("X").entries
    return 0.5 * (np.eye(2, dtype=complex) + (-1) ** b * xz / math.sqrt(2.0))


def ideal_chsh_measurements(n_copies: int) -> tuple[MeasurementAssembly, MeasurementAssembly]:
    """Optimal product measurements for the N-fold CHSH game.

    Alice's setting string picks Z or X per copy; Bob's picks (X+Z)/sqrt(2)
    or (X-Z)/sqrt(2) per copy.  Every effect is a rank-1 projector on 2^N
    dimensions and each setting is complete.
    """
    n = n_copies
    if n < 1 or n > 4:
        raise ValueError("dimension cap: n_copies must lie in [1, 4]")
    d = 2**n
    alice_effects: dict[tuple[int, int], Operator] = {}
    bob_effects: dict[tuple[int, int], Operator] = {}
    for setting in range(d):
        for outcome in range(d):
            a_factors = [_qubit_effect_alice(_bit(setting, j), _bit(outcome, j)) for j in range(n)]
            b_factors = [_qubit_effect_bob(_bit(setting, j), _bit(outcome, j)) for j in range(n)]
            alice_effects[(setting, outcome)] = Operator.from_matrix(_tensor_le(a_factors), hermitian=True)
            bob_effects[(setting, outcome)] = Operator.from_matrix(_tensor_le(b_factors), hermitian=True)
    alice = MeasurementAssembly(n_settings=d, outcomes_per_setting=d, effects=alice_effects)
    bob = MeasurementAssembly(n_settings=d, outcomes_per_setting=d, effects=bob_effects)
    return alice, bob


def build_strategy(kind: str, n_copies: int, eta: float, visibility: float) -> RoutedStrategy:
    """Assemble one of the named strategies with the noise knobs applied.

    The shared state is the visibility mixture of N maximally entangled
    pairs with white noise; ``eta`` is stored for the long-path loss model.
    The far device copies Alice (rbb84), copies the near Bob device (rchsh),
    or interleaves both on a single qubit pair (rbb84chsh, N=1 only).
    """
    kind = kind.lower()
    if kind not in STRATEGY_KINDS:
        raise ValueError(f"unknown strategy kind {kind!r}")
    if kind == "rbb84chsh" and n_copies != 1:
        raise ValueError("rbb84chsh is a qubit protocol: n_copies must be 1")
    if not 0.0 <= eta <= 1.0 or not 0.0 <= visibility <= 1.0:
        raise ValueError("eta and visibility must lie in [0, 1]")

    alice, bob = ideal_chsh_measurements(n_copies)
    d = 2**n_copies
    state = visibility * maximally_entangled_state(n_copies) + (1.0 - visibility) * np.eye(d * d, dtype=complex) / (d * d)

    if kind == "rbb84":
        b1 = alice
    elif kind == "rchsh":
        b1 = bob
    else:
        effects = {}
        for y in range(2):
            for b in range(2):
                effects[(y, b)] = alice.effects[(y, b)]
                effects[(y + 2, b)] = bob.effects[(y, b)]
        b1 = MeasurementAssembly(n_settings=4, outcomes_per_setting=2, effects=effects)

    return RoutedStrategy(
        n_copies=n_copies,
        state=Operator.from_matrix(state, hermitian=True),
        alice=alice,
        b0=bob,
        b1=b1,
        eta=eta,
        visibility=visibility,
        kind=kind,
    )


def _born_tables(strategy: RoutedStrategy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Joint Born tables tr(rho A (x) B) for both Bob devices plus p_A."""
    d = 2**strategy.n_copies
    rho = strategy.state.entries.reshape(d, d, d, d)
    a_eff = strategy.alice.as_array()
    b0_eff = strategy.b0.as_array()
    b1_eff = strategy.b1.as_array()
    # tr(rho (A (x) B)) = sum rho[i,k,j,l] A[j,i] B[l,k]
    p0 = np.einsum("ikjl,xaji,yblk->xyab", rho, a_eff, b0_eff, optimize=True).real
    p1 = np.einsum("ikjl,xaji,yblk->xyab", rho, a_eff, b1_eff, optimize=True).real
    pa = np.einsum("ikjk,xaji->xa", rho, a_eff, optimize=True).real
    return p0, p1, pa


def correlation(strategy: RoutedStrategy) -> RoutedCorrelation:
    """Full routed correlation with binomial thinning on the long path.

    Long-path click outcomes are scaled by eta and the no-click column
    carries the remaining (1 - eta) * p_A(a | x) weight, independent of the
    outcome that would have occurred.
    """
    p0, p1_born, pa = _born_tables(strategy)
    eta = strategy.eta
    n_y1 = strategy.b1.n_settings
    n_b1 = strategy.b1.outcomes_per_setting
    n_x, n_a = pa.shape
    p1 = np.zeros((n_x, n_y1, n_a, n_b1 + 1), dtype=float)
    p1[:, :, :, :n_b1] = eta * p1_born
    p1[:, :, :, n_b1] = (1.0 - eta) * pa[:, None, :]
    return RoutedCorrelation(n_copies=strategy.n_copies, p_short=p0, p_long=p1, eta=eta)


def conditional_states(strategy: RoutedStrategy) -> dict[tuple[int, int], tuple[float, Operator]]:
    """Bob's states remotely prepared by Alice's setting/outcome pairs.

    Returns (probability, normalized state) per (x, a); pairs whose outcome
    probability falls below 1e-14 are omitted (and logged), since the
    conditional state is undefined there.
    """
    d = 2**strategy.n_copies
    rho = strategy.state.entries.reshape(d, d, d, d)
    a_eff = strategy.alice.as_array()
    # tr_A[(A (x) I) rho (A (x) I)] contracts to rho with A @ A on Alice's slot.
    a_sq = np.einsum("xaij,xajk->xaik", a_eff, a_eff)
    sigma = np.einsum("ikjl,xaji->xakl", rho, a_sq, optimize=True)
    probs = np.einsum("xakk->xa", sigma).real
    out: dict[tuple[int, int], tuple[float, Operator]] = {}
    for x in range(a_eff.shape[0]):
        for a in range(a_eff.shape[1]):
            p = float(probs[x, a])
            if p < 1e-14:
                log.warning("conditional state omitted for (x=%d, a=%d): p_A=%.3e", x, a, p)
                continue
            out[(x, a)] = (p, Operator.from_matrix(sigma[x, a] / p, hermitian=True))
    return out
