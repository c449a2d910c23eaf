"""Dense complex matrix helpers.

All functions accept a single ``(N, N)`` matrix or a stack ``(..., N, N)``
and act on the trailing two axes, so simulation kernels can pass a whole
batch of replicates at once.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure, NegativeEigenvalue

__all__ = [
    "dagger",
    "hermitian_part",
    "is_hermitian",
    "eigh",
    "psd_sqrt",
    "psd_inv_sqrt",
    "hp_coefficient",
    "det_and_trace",
    "eye_like",
]


def dagger(A: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(A, -1, -2))


def hermitian_part(A: np.ndarray) -> np.ndarray:
    """Return ``(A + A^dagger) / 2``.

    The result is Hermitian bit for bit: entry ``(i, j)`` is computed as
    ``(a_ij + conj(a_ji)) / 2`` and entry ``(j, i)`` as ``(a_ji + conj(a_ij)) / 2``,
    which are exact conjugates because floating point addition commutes.
    """
    A = np.asarray(A)
    if A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    A = A.astype(np.complex128, copy=False)
    return (A + dagger(A)) * 0.5


def is_hermitian(H: np.ndarray) -> bool:
    """Exact (bit-level) Hermitian check."""
    return bool(np.all(H == dagger(H)))


def eye_like(A: np.ndarray) -> np.ndarray:
    n = A.shape[-1]
    return np.broadcast_to(np.eye(n, dtype=A.dtype), A.shape)


def eigh(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of Hermitian matrices.

    Returns
    -------
    eigenvalues : ndarray, shape (..., N)
        Real, in ascending order.
    U : ndarray, shape (..., N, N)
        Unitary; columns are eigenvectors so that ``H = U diag(w) U^dagger``.
    """
    try:
        w, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Hermitian eigensolver did not converge: {exc}") from exc
    return w, U


def _from_spectrum(w: np.ndarray, U: np.ndarray) -> np.ndarray:
    return hermitian_part((U * w[..., None, :]) @ dagger(U))


def psd_sqrt(H: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-tol * ||H||_max, 0)`` are treated as rounding noise and
    clipped to zero; anything more negative raises ``NegativeEigenvalue``.
    """
    w, U = eigh(H)
    scale = np.max(np.abs(H), axis=(-1, -2), keepdims=False)
    bad = w[..., 0] < -tol * np.maximum(scale, 1e-300)
    if np.any(bad):
        raise NegativeEigenvalue(f"minimum eigenvalue {np.min(w[..., 0]):.3e} is negative")
    return _from_spectrum(np.sqrt(np.clip(w, 0.0, None)), U)


def psd_inv_sqrt(H: np.ndarray) -> np.ndarray:
    """Inverse principal square root of a positive definite Hermitian matrix."""
    w, U = eigh(H)
    if np.any(w <= 0):
        raise NegativeEigenvalue("matrix is not positive definite")
    return _from_spectrum(1.0 / np.sqrt(w), U)


def hp_coefficient(X: np.ndarray, inverse: bool = False) -> np.ndarray:
    """``sqrt((I + X^2) / 2)`` for Hermitian ``X`` (or its inverse).

    Only one eigendecomposition of ``X`` is needed: ``(I + X^2)/2`` shares the
    eigenvectors of ``X`` and has eigenvalues ``(1 + lambda^2)/2 >= 1/2``.
    """
    w, U = eigh(X)
    d = np.sqrt(0.5 * (1.0 + w * w))
    if inverse:
        d = 1.0 / d
    return _from_spectrum(d, U)


def det_and_trace(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Determinant (LU with partial pivoting) and trace."""
    A = np.asarray(A)
    if A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    return np.linalg.det(A), np.trace(A, axis1=-2, axis2=-1)
