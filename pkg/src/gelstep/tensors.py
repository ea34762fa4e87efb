"""Small dense tensor algebra for d in {2, 3}.

Conventions used across the package: a matrix field is an array whose two
leading axes are the matrix indices, shape (d, d, *nodes); a third-order
tensor field has shape (d, d, d, *nodes). A single matrix is the degenerate
case with no node axes. Determinants and inverses are closed-form cofactor
expressions (never LAPACK calls), which keeps them exact, branch-free and
vectorized over arbitrary trailing axes.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularMatrix

DET_FLOOR = 1e-14


def mat_det(M: np.ndarray) -> np.ndarray:
    """Determinant of a (d, d, ...) array by cofactor expansion."""
    d = M.shape[0]
    if M.shape[1] != d or d not in (2, 3):
        raise ValueError(f"expected (d, d, ...) with d in {{2,3}}, got {M.shape}")
    if d == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return (
        M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
        - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
        + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
    )


def mat_inv_det(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse and determinant of a (d, d, ...) array.

    Raises SingularMatrix if any entry of the batch has |det| < 1e-14; that
    threshold is far below any determinant the energy barrier admits, so
    hitting it always signals a degenerate deformation gradient.
    """
    det = mat_det(M)
    if np.any(np.abs(det) < DET_FLOOR):
        worst = float(np.min(np.abs(det)))
        raise SingularMatrix(f"matrix determinant {worst:.3e} below {DET_FLOOR:.0e}")
    d = M.shape[0]
    inv = np.empty_like(M)
    if d == 2:
        inv[0, 0] = M[1, 1]
        inv[0, 1] = -M[0, 1]
        inv[1, 0] = -M[1, 0]
        inv[1, 1] = M[0, 0]
    else:
        inv[0, 0] = M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
        inv[0, 1] = M[0, 2] * M[2, 1] - M[0, 1] * M[2, 2]
        inv[0, 2] = M[0, 1] * M[1, 2] - M[0, 2] * M[1, 1]
        inv[1, 0] = M[1, 2] * M[2, 0] - M[1, 0] * M[2, 2]
        inv[1, 1] = M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
        inv[1, 2] = M[0, 2] * M[1, 0] - M[0, 0] * M[1, 2]
        inv[2, 0] = M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]
        inv[2, 1] = M[0, 1] * M[2, 0] - M[0, 0] * M[2, 1]
        inv[2, 2] = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    inv /= det
    return inv, det


def transpose(M: np.ndarray) -> np.ndarray:
    """Matrix transpose on the two leading axes."""
    return np.swapaxes(M, 0, 1)


def sym_part(M: np.ndarray) -> np.ndarray:
    """(M + M^T)/2 on the two leading axes."""
    return 0.5 * (M + np.swapaxes(M, 0, 1))


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Contraction A_ik B_kj over the leading matrix axes, batched."""
    return np.einsum("ik...,kj...->ij...", A, B)


def matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    """A_ij v_j over leading axes, batched."""
    return np.einsum("ij...,j...->i...", A, v)


def ddot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Full contraction A:B = sum_ij A_ij B_ij, batched over trailing axes."""
    return np.einsum("ij...,ij...->...", A, B)


def triple_dot(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Full contraction of two third-order tensors, sum_ijk G_ijk H_ijk."""
    return np.einsum("ijk...,ijk...->...", G, H)


def frob(T: np.ndarray, order: int) -> np.ndarray:
    """Frobenius norm over the first `order` axes (2 for matrices, 3 for
    third-order tensors), batched over the rest."""
    sq = np.sum(T * T, axis=tuple(range(order)))
    return np.sqrt(sq)
