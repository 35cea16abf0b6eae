"""Dense symmetric eigensolvers, including the symmetric-definite pencil ``(S_b, S_t)``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular


class EigenError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues sorted descending with eigenvectors as matching columns.

    ``metric_normalized`` means the columns are orthonormal in the metric of
    the second matrix of the pencil. ``deficiency`` is the dimension of the
    discarded null space of that metric (0 when it was definite).
    """

    values: np.ndarray
    vectors: np.ndarray
    metric_normalized: bool = False
    deficiency: int = 0


def _symmetrize(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise EigenError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise EigenError(f"{name} has non-finite entries")
    return 0.5 * (M + M.T)


def fix_signs(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first coordinate with magnitude above ``tol * max|col|`` is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.abs(col) > tol * np.abs(col).max()
        if np.any(big) and col[np.argmax(big)] < 0:
            V[:, j] = -col
    return V


def symmetric_eig(M) -> EigenPairs:
    M = _symmetrize(M, "M")
    w, V = np.linalg.eigh(M)
    return EigenPairs(w[::-1].copy(), fix_signs(V[:, ::-1]))


def generalized_eig(S_b, S_t, s: int) -> EigenPairs:
    """Top-``s`` solutions of ``S_b a = mu S_t a`` with ``A^T S_t A = I``.

    Definite ``S_t`` is handled by Cholesky reduction ``L^{-1} S_b L^{-T}``.
    A positive semi-definite ``S_t`` is restricted to its range (eigenvalues
    above ``1e-10`` times the largest) and a warning reports the discarded
    dimension; a clearly negative eigenvalue raises :class:`EigenError`.
    """
    S_b = _symmetrize(S_b, "S_b")
    S_t = _symmetrize(S_t, "S_t")
    if S_b.shape != S_t.shape:
        raise EigenError(f"shape mismatch: S_b {S_b.shape} vs S_t {S_t.shape}")
    if s < 1:
        raise EigenError("s must be at least 1")

    d, U = np.linalg.eigh(S_t)
    eps = 1e-10 * max(d[-1], 0.0)
    if d[0] < -eps:
        raise EigenError(f"S_t is indefinite (smallest eigenvalue {d[0]:.3e})")
    keep = d > eps
    usable = int(keep.sum())
    if s > usable:
        raise EigenError(f"requested {s} eigenpairs but the usable subspace has dimension {usable}")

    deficiency = S_t.shape[0] - usable
    if deficiency == 0:
        L = cholesky(S_t, lower=True)
        C = solve_triangular(L, S_b, lower=True)
        M = solve_triangular(L, C.T, lower=True)
        w, Y = np.linalg.eigh(0.5 * (M + M.T))
        w, Y = w[::-1][:s], Y[:, ::-1][:, :s]
        A = solve_triangular(L.T, Y, lower=False)
    else:
        warnings.warn(
            f"S_t is singular; restricting to its {usable}-dimensional range "
            f"({deficiency} direction(s) dropped)",
            stacklevel=2,
        )
        W = U[:, keep] / np.sqrt(d[keep])
        M = W.T @ S_b @ W
        w, Y = np.linalg.eigh(0.5 * (M + M.T))
        w, Y = w[::-1][:s], Y[:, ::-1][:, :s]
        A = W @ Y
    return EigenPairs(w.copy(), fix_signs(A), metric_normalized=True, deficiency=deficiency)


def metric_normalize(A: np.ndarray, S_t: np.ndarray) -> np.ndarray:
    """Rescale columns of ``A`` to unit ``S_t``-norm (no orthogonalization)."""
    norms = np.sqrt(np.einsum("ij,ij->j", A, S_t @ A))
    return A / norms
