"""Small dense linear algebra: symmetric eigendecomposition, sigma_max, solves.

Matrices are plain ``numpy`` arrays. The eigensolver is a cyclic Jacobi
rotation scheme; linear solves go through LAPACK's partial-pivot LU via
``scipy.linalg`` with an explicit pivot check.
"""

import logging
import math
import warnings
from typing import Tuple

import numpy as np
from scipy import linalg as sla

from .exceptions import AsymmetricMatrixError, ConvergenceError, SingularMatrixError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
OFF_DIAGONAL_TOL = 1e-12
PIVOT_TOL = 1e-12
MAX_SWEEPS = 100


def _as_matrix(matrix) -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_symmetric(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    rows, cols = matrix.shape
    if rows != cols:
        raise AsymmetricMatrixError(f"matrix must be square, got {rows}x{cols}")
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > tol * scale:
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """First non-negligible component of every eigenvector is positive"""
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        cutoff = 1e-12 * np.max(np.abs(column), initial=0.0)
        nonzero = np.flatnonzero(np.abs(column) > cutoff)
        if nonzero.size and column[nonzero[0]] < 0:
            vectors[:, k] = -column
    return vectors


def sym_eig(matrix, tol: float = OFF_DIAGONAL_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-pairs of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as orthonormal columns in the same order.
    """
    a = _as_matrix(matrix)
    check_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)

    scale = np.linalg.norm(a)
    if n == 0 or scale == 0.0:
        return np.zeros(n), v

    for sweep in range(MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        raise ConvergenceError(f"Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps")

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], _fix_signs(v[:, order])


def max_eigenvalue(matrix) -> float:
    eigenvalues, _ = sym_eig(matrix)
    return float(eigenvalues[0]) if eigenvalues.size else 0.0


def max_singular_value(matrix) -> float:
    """sigma_max(M) = sqrt(lambda_max(M'M))"""
    m = _as_matrix(matrix)
    if m.size == 0:
        return 0.0
    gram = m.T @ m
    gram = 0.5 * (gram + gram.T)
    return math.sqrt(max(max_eigenvalue(gram), 0.0))


def solve(matrix, rhs) -> np.ndarray:
    """Solve ``M X = rhs`` by partial-pivot Gaussian elimination"""
    m = _as_matrix(matrix)
    b = np.array(rhs, dtype=float)
    rows, cols = m.shape
    if rows != cols:
        raise ValueError(f"solve needs a square matrix, got {rows}x{cols}")
    if b.shape[0] != rows:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {rows}")
    if rows == 0:
        return b.copy()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(m, check_finite=False)
    threshold = PIVOT_TOL * np.max(np.abs(m))
    smallest = np.min(np.abs(np.diag(lu)))
    if smallest <= threshold:
        raise SingularMatrixError(f"pivot {smallest:.3g} below threshold {threshold:.3g}")
    return sla.lu_solve((lu, piv), b, check_finite=False)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)
