"""Dense complex-matrix kernels shared by the rest of the package.

Everything works on ``numpy`` arrays of ``complex128``. Vectors are 2-D
column arrays where the distinction matters (``kron``/``vec``), plain 1-D
arrays elsewhere.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

# Singular values below RANK_TOL * s_max count as zero.
RANK_TOL = 1e-12
# psd_sqrt accepts eigenvalues down to this (clamped to zero).
PSD_TOL = 1e-10


class NumericError(ArithmeticError):
    """A linear-algebra routine failed to converge or met a singular input."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    return a


def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def exchange_matrix(p: int) -> np.ndarray:
    """``p x p`` matrix with ones on the antidiagonal."""
    if p < 1:
        raise DomainError(f"exchange matrix needs p >= 1, got {p}")
    return np.fliplr(np.eye(p, dtype=complex))


def vec(a) -> np.ndarray:
    """Column-major stacking into an ``(m n) x 1`` column.

    With this convention ``kron(B.T, A) @ vec(X) == vec(A @ X @ B)``.
    """
    return as_matrix(a).reshape(-1, 1, order="F")


def unvec(v, rows: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return v.reshape(rows, -1, order="F")


def svd(a, full_matrices: bool = False):
    """Return ``(U, s, V)`` with ``a = U @ diag(s) @ V^H`` and ``s`` descending.

    Note that the third factor is ``V`` itself, not ``V^H``.
    """
    a = as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=full_matrices)
    except np.linalg.LinAlgError:
        try:
            u, s, vh = sla.svd(a, full_matrices=full_matrices, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"SVD did not converge: {exc}") from exc
    return u, s, vh.conj().T


def eig(a):
    """Eigenvalues and right eigenvectors of a square matrix."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DomainError(f"eig needs a square matrix, got {a.shape}")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition did not converge: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise NumericError("eigendecomposition produced non-finite values")
    return w, v


def numerical_rank(s: np.ndarray) -> int:
    s = np.asarray(s)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def pinv(a) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the package-wide rank cut."""
    u, s, v = svd(as_matrix(a))
    r = numerical_rank(s)
    if r == 0:
        return np.zeros((v.shape[0], u.shape[0]), dtype=complex)
    return (v[:, :r] / s[:r]) @ u[:, :r].conj().T


def psd_sqrt(k) -> np.ndarray:
    """Hermitian square root of a Hermitian PSD matrix."""
    k = as_matrix(k)
    if k.shape[0] != k.shape[1]:
        raise DomainError(f"psd_sqrt needs a square matrix, got {k.shape}")
    k = 0.5 * (k + k.conj().T)
    try:
        w, v = np.linalg.eigh(k)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigh did not converge: {exc}") from exc
    if w.min() < -PSD_TOL:
        raise DomainError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def wrap_phase(x):
    """Map angles to the principal interval (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    out = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)
