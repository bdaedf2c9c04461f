"""Dense complex linear algebra for small multi-qubit operators.

Everything here is a pure function over immutable values: operators are
frozen wrappers around read-only numpy arrays, so concurrent reads are safe.
Dimensions stay small (at most 2^8 per factor group), which makes dense
LAPACK routines the right tool throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Operator",
    "PureState",
    "pauli",
    "tensor",
    "operator_norm",
    "max_eigenvalue",
    "partial_trace",
    "psd_sqrt",
    "gram_norm_bound",
    "elementwise_dominance_norm_check",
]

HERMITIAN_ATOL = 1e-12
PSD_ATOL = 1e-10


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Operator:
    """Square complex matrix with an optional Hermitian cache flag.

    ``entries`` is row-major and read-only after construction.  When the
    ``hermitian`` flag is set the entries must satisfy M = M^dagger within
    1e-12; the constructor enforces this.
    """

    dim: int
    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self) -> None:
        arr = _frozen(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"operator entries must be square, got shape {arr.shape}")
        if arr.shape[0] != self.dim:
            raise ValueError(f"dim={self.dim} does not match matrix side {arr.shape[0]}")
        object.__setattr__(self, "entries", arr)
        if self.hermitian and not np.allclose(arr, arr.conj().T, atol=HERMITIAN_ATOL, rtol=0.0):
            raise ValueError("hermitian flag set but entries are not Hermitian within 1e-12")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray | Sequence[Sequence[complex]], hermitian: bool | None = None) -> "Operator":
        arr = np.asarray(matrix, dtype=complex)
        if hermitian is None:
            hermitian = bool(np.allclose(arr, arr.conj().T, atol=HERMITIAN_ATOL, rtol=0.0))
        return cls(dim=arr.shape[0], entries=arr, hermitian=hermitian)

    @classmethod
    def identity(cls, dim: int) -> "Operator":
        return cls(dim=dim, entries=np.eye(dim, dtype=complex), hermitian=True)

    @classmethod
    def projector(cls, ket: np.ndarray | Sequence[complex]) -> "Operator":
        """Rank-1 projector |psi><psi| for a (normalized) state vector."""
        vec = np.asarray(ket, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(vec)
        if nrm == 0:
            raise ValueError("cannot project onto the zero vector")
        vec = vec / nrm
        return cls(dim=vec.size, entries=np.outer(vec, vec.conj()), hermitian=True)

    def matrix(self) -> np.ndarray:
        """Writable copy of the entries."""
        return np.array(self.entries)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in operator product")
        return Operator.from_matrix(self.entries @ other.entries)

    def __add__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in operator sum")
        return Operator(
            dim=self.dim,
            entries=self.entries + other.entries,
            hermitian=self.hermitian and other.hermitian,
        )

    def __sub__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in operator difference")
        return Operator(
            dim=self.dim,
            entries=self.entries - other.entries,
            hermitian=self.hermitian and other.hermitian,
        )

    def scale(self, factor: complex) -> "Operator":
        herm = self.hermitian and abs(complex(factor).imag) == 0.0
        return Operator(dim=self.dim, entries=self.entries * factor, hermitian=herm)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector; squared amplitudes sum to 1 within 1e-12."""

    dim: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vec = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if vec.size != self.dim:
            raise ValueError(f"dim={self.dim} does not match amplitude count {vec.size}")
        norm_sq = float(np.sum(np.abs(vec) ** 2))
        if abs(norm_sq - 1.0) > 1e-12:
            raise ValueError(f"state not normalized: |psi|^2 = {norm_sq}")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)

    def density(self) -> Operator:
        return Operator(
            dim=self.dim,
            entries=np.outer(self.amplitudes, self.amplitudes.conj()),
            hermitian=True,
        )


# Computational- and conjugate-basis qubit vectors used throughout.
KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
KET_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def pauli(kind: str) -> Operator:
    """Return the 2x2 identity, X or Z operator with the hermitian flag set."""
    try:
        mat = _PAULI[kind.upper()]
    except KeyError:
        raise ValueError(f"unknown Pauli kind {kind!r}; expected one of I, X, Z") from None
    return Operator(dim=2, entries=mat, hermitian=True)


def tensor(ops: Iterable[Operator]) -> Operator:
    """Kronecker product of the operators in list order."""
    ops = list(ops)
    if not ops:
        raise ValueError("empty tensor product")
    mat = ops[0].entries
    herm = ops[0].hermitian
    for op in ops[1:]:
        mat = np.kron(mat, op.entries)
        herm = herm and op.hermitian
    return Operator(dim=mat.shape[0], entries=mat, hermitian=herm)


def operator_norm(op: Operator) -> float:
    """Largest singular value; for Hermitian operators this is max |eigenvalue|."""
    if not np.all(np.isfinite(op.entries)):
        raise ValueError("operator has non-finite entries")
    if op.hermitian:
        eigs = np.linalg.eigvalsh(op.entries)
        return float(max(abs(eigs[0]), abs(eigs[-1])))
    return float(np.linalg.norm(op.entries, ord=2))


def max_eigenvalue(op: Operator) -> float:
    """Algebraically largest eigenvalue of a Hermitian operator."""
    if not op.hermitian:
        raise ValueError("requires Hermitian operator")
    return float(np.linalg.eigvalsh(op.entries)[-1])


def partial_trace(op: Operator, dims: Sequence[int], keep: Iterable[int]) -> Operator:
    """Trace out the tensor factors not listed in ``keep``.

    ``dims`` gives the factor dimensions in tensor order (their product must
    equal ``op.dim``); ``keep`` is the set of factor indices to retain.  The
    trace is preserved: tr(result) == tr(op).
    """
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise ValueError("factor dimensions must be positive")
    total = math.prod(dims)
    if total != op.dim:
        raise ValueError(f"product of dims {dims} != operator dim {op.dim}")
    keep_set = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep_set):
        raise ValueError(f"keep indices {keep_set} out of range for {len(dims)} factors")

    n = len(dims)
    tensor_shape = dims + dims
    arr = op.entries.reshape(tensor_shape)
    # Contract row/col indices of every discarded factor pairwise.
    discard = [i for i in range(n) if i not in keep_set]
    for i in sorted(discard, reverse=True):
        arr = np.trace(arr, axis1=i, axis2=i + n)
        n -= 1
    kept_dim = math.prod(dims[k] for k in keep_set) if keep_set else 1
    out = arr.reshape(kept_dim, kept_dim)
    return Operator.from_matrix(out, hermitian=op.hermitian)


def psd_sqrt(op: Operator, atol: float = PSD_ATOL) -> Operator:
    """Matrix square root of a numerically PSD Hermitian operator.

    Eigenvalues below zero (at most ``atol`` in magnitude) are clamped to 0
    before taking square roots, so square roots of floating-point projectors
    are well defined.
    """
    if not op.hermitian:
        raise ValueError("requires Hermitian operator")
    eigvals, eigvecs = np.linalg.eigh(op.entries)
    if eigvals[0] < -atol:
        raise ValueError(f"operator is not PSD: min eigenvalue {eigvals[0]}")
    root = eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.conj().T
    return Operator.from_matrix(root, hermitian=True)


def gram_norm_bound(psd_ops: Sequence[Operator]) -> tuple[Operator, float]:
    """Norm-Gram bound on the operator norm of a sum of PSD operators.

    Returns the k-by-k matrix G with G[l, l'] = ||sqrt(S_l) sqrt(S_l')|| and
    its operator norm, which upper-bounds ||sum_l S_l||.
    """
    ops = list(psd_ops)
    if not ops:
        raise ValueError("need at least one operator")
    roots = []
    for op in ops:
        if not op.hermitian or np.linalg.eigvalsh(op.entries)[0] < -PSD_ATOL:
            raise ValueError("Popovici-Sebestyen requires PSD operators")
        roots.append(psd_sqrt(op).entries)
    k = len(ops)
    gram = np.zeros((k, k), dtype=float)
    for i in range(k):
        for j in range(i, k):
            val = float(np.linalg.norm(roots[i] @ roots[j], ord=2))
            gram[i, j] = val
            gram[j, i] = val
    gram_op = Operator.from_matrix(gram, hermitian=True)
    return gram_op, float(np.linalg.eigvalsh(gram)[-1])


def elementwise_dominance_norm_check(a: Operator, b: Operator) -> bool:
    """Witness of the element-wise norm lemma for nonnegative matrices.

    Preconditions: both matrices are real with nonnegative entries and
    a <= b entrywise.  Under those hypotheses ||a|| <= ||b|| always holds;
    the return value reports the comparison (with 1e-10 slack) so the lemma
    can be exercised as a checkable property.
    """
    if a.dim != b.dim:
        raise ValueError("lemma preconditions violated: dimension mismatch")
    am = a.entries
    bm = b.entries
    if np.max(np.abs(am.imag)) > HERMITIAN_ATOL or np.max(np.abs(bm.imag)) > HERMITIAN_ATOL:
        raise ValueError("lemma preconditions violated: entries must be real")
    ar = am.real
    br = bm.real
    if np.min(ar) < -HERMITIAN_ATOL or np.min(br) < -HERMITIAN_ATOL:
        raise ValueError("lemma preconditions violated: entries must be nonnegative")
    if np.any(ar > br + HERMITIAN_ATOL):
        raise ValueError("lemma preconditions violated: a must not exceed b entrywise")
    return bool(np.linalg.norm(ar, ord=2) <= np.linalg.norm(br, ord=2) + 1e-10)
