"""Dense linear-algebra kernels shared by the LM/BR trainers and ANFIS.

Both solvers work on small dense problems (at most a few hundred unknowns),
so they lean on LAPACK through scipy rather than hand-rolled loops.
"""

from typing import NamedTuple

import numpy as np
from scipy import linalg

__all__ = [
    "NotPositiveDefinite",
    "LstsqResult",
    "solve_spd",
    "solve_least_squares",
    "RANK_COND_LIMIT",
    "RIDGE_LAMBDA",
]

RANK_COND_LIMIT = 1e12
RIDGE_LAMBDA = 1e-8
_SYM_RTOL = 1e-10


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot; callers usually raise damping."""


class LstsqResult(NamedTuple):
    x: np.ndarray
    rank_deficient: bool
    cond: float


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _as_vector(b, n):
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != n:
        raise ValueError(f"right-hand side must have length {n}, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side has non-finite entries")
    return b


def solve_spd(A, b):
    """Solve ``A x = b`` for symmetric positive-definite ``A`` via Cholesky.

    Raises
    ------
    NotPositiveDefinite
        If the factorisation meets a pivot <= 0.
    ValueError
        On shape mismatch or if ``A`` is not symmetric to 1e-10 relative.
    """
    A = _as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError(f"matrix must be square, got {A.shape}")
    b = _as_vector(b, n)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > _SYM_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    try:
        c, lower = linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.any(np.diag(c) <= 0.0):
        raise NotPositiveDefinite("non-positive pivot")
    return linalg.cho_solve((c, lower), b, check_finite=False)


def solve_least_squares(A, b, ridge=RIDGE_LAMBDA, cond_limit=RANK_COND_LIMIT):
    """Minimise ``||A x - b||_2``.

    Householder QR is used directly when ``A`` is tall and well conditioned.
    When it has fewer rows than columns, or its 2-norm condition number
    exceeds ``cond_limit``, the system is treated as rank deficient: the ridge problem ``min ||A x - b||^2 + ridge ||x||^2``
    is solved instead (as an augmented QR, so the normal equations are never
    formed) and the result is flagged.

    Returns
    -------
    LstsqResult
        ``(x, rank_deficient, cond)``.
    """
    A = _as_matrix(A)
    m, n = A.shape
    b = _as_vector(b, m)

    cond = float("inf")
    if m >= n:
        q, r = np.linalg.qr(A, mode="reduced")
        sv = np.linalg.svd(r, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if cond <= cond_limit:
        x = linalg.solve_triangular(r, q.T @ b, lower=False, check_finite=False)
        return LstsqResult(x, False, cond)

    aug = np.vstack([A, np.sqrt(ridge) * np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    q, r = np.linalg.qr(aug, mode="reduced")
    x = linalg.solve_triangular(r, q.T @ rhs, lower=False, check_finite=False)
    return LstsqResult(x, True, cond)
