"""Dense complex operator algebra used by every other module.

Operators are thin wrappers around ``numpy`` arrays that remember which basis
they live in.  All functions accept either an :class:`OperatorMatrix` or any
square array-like.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

HERMITIAN_RTOL = 1e-10


class InvalidDimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Square complex matrix tagged with a basis label."""

    data: np.ndarray
    basis_label: str = "fock"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidDimensionError(f"operator must be square, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def dag(self) -> OperatorMatrix:
        return OperatorMatrix(self.data.conj().T, self.basis_label)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data, 2))

    def _wrap(self, arr):
        return OperatorMatrix(arr, self.basis_label)

    def __matmul__(self, other):
        return self._wrap(self.data @ np.asarray(other))

    def __rmatmul__(self, other):
        return self._wrap(np.asarray(other) @ self.data)

    def __add__(self, other):
        return self._wrap(self.data + np.asarray(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.data - np.asarray(other))

    def __rsub__(self, other):
        return self._wrap(np.asarray(other) - self.data)

    def __mul__(self, scalar):
        return self._wrap(self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._wrap(self.data / scalar)

    def __neg__(self):
        return self._wrap(-self.data)

    def __repr__(self):
        return f"OperatorMatrix(dim={self.dim}, basis_label={self.basis_label!r})"


def as_operator(op, basis_label: str = "fock") -> OperatorMatrix:
    if isinstance(op, OperatorMatrix):
        return op
    return OperatorMatrix(np.asarray(op, dtype=np.complex128), basis_label)


def destroy(dim: int) -> OperatorMatrix:
    """Lowering operator on the number basis, ``a[n, n+1] = sqrt(n+1)``."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"ladder operator needs dim >= 2, got {dim}")
    dim = int(dim)
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex))


def identity(dim: int, basis_label: str = "fock") -> OperatorMatrix:
    return OperatorMatrix(np.eye(int(dim), dtype=complex), basis_label)


def kron(a, b) -> OperatorMatrix:
    a, b = as_operator(a), as_operator(b)
    return OperatorMatrix(np.kron(a.data, b.data), f"{a.basis_label}*{b.basis_label}")


def lift(op, index: int, dims) -> OperatorMatrix:
    """Embed a single-mode operator at position ``index`` of a product space."""
    dims = tuple(int(d) for d in dims)
    op = as_operator(op)
    if op.dim != dims[index]:
        raise InvalidDimensionError(
            f"operator dim {op.dim} does not match factor {index} of {dims}")
    left = int(np.prod(dims[:index], dtype=int))
    right = int(np.prod(dims[index + 1:], dtype=int))
    data = np.kron(np.kron(np.eye(left), op.data), np.eye(right))
    return OperatorMatrix(data, "product(" + "x".join(map(str, dims)) + ")")


def hermiticity_error(h) -> float:
    """Largest entry of ``|H - H^dagger|``."""
    arr = np.asarray(h)
    return float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0


def check_hermitian(h, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    arr = np.asarray(h, dtype=np.complex128)
    scale = max(float(np.linalg.norm(arr, 2)), 1.0) if arr.size else 1.0
    err = hermiticity_error(arr)
    if err > rtol * scale:
        raise NotHermitianError(
            f"max|H - H^dag| = {err:.3e} exceeds {rtol:g} * ||H|| = {rtol * scale:.3e}")
    return arr


def eig_hermitian(h, subset: tuple[int, int] | None = None):
    """Eigen-decomposition of a Hermitian operator.

    Parameters
    ----------
    h : OperatorMatrix or array_like
        Hermitian matrix; checked to ``1e-10 * ||h||``.
    subset : (lo, hi), optional
        Inclusive index range of eigenpairs to compute, ascending order.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray
        Columns are orthonormal eigenvectors.
    """
    arr = check_hermitian(h)
    # symmetrize so LAPACK sees exactly Hermitian input
    arr = 0.5 * (arr + arr.conj().T)
    if subset is None:
        return scipy.linalg.eigh(arr, check_finite=True)
    return scipy.linalg.eigh(arr, subset_by_index=list(subset), check_finite=True)


def apply_function_to_hermitian(h, f: Callable[[np.ndarray], np.ndarray]) -> OperatorMatrix:
    """Return ``V diag(f(lambda)) V^dagger`` for Hermitian ``h``."""
    label = h.basis_label if isinstance(h, OperatorMatrix) else "fock"
    w, v = eig_hermitian(h)
    return OperatorMatrix((v * np.asarray(f(w))) @ v.conj().T, label)


def commutator(a, b) -> OperatorMatrix:
    a, b = np.asarray(a), np.asarray(b)
    return OperatorMatrix(a @ b - b @ a)
