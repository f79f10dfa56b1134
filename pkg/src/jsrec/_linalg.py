"""Orthonormal bases and projections used by every recovery criterion.

All projections go through an orthonormal factor of the column block
(SVD, rank-revealing); normal equations are never formed.
"""

import numpy as np


def default_rank_tol(m, r):
    return 1e-10 * max(m, r)


def orth(M, rank_tol=None):
    """Orthonormal basis of the column span of ``M``.

    Singular directions with ``s_i <= rank_tol * s_max`` are dropped, so the
    returned basis has ``numerical_rank(M)`` columns (possibly zero).
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    if M.ndim != 2 or M.shape[1] == 0:
        return np.zeros((m, 0))
    if rank_tol is None:
        rank_tol = default_rank_tol(*M.shape)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m, 0))
    keep = int(np.count_nonzero(s > rank_tol * s[0]))
    return U[:, :keep]


def complement(U):
    """Orthonormal basis of the orthogonal complement of ``span(U)``.

    ``U`` must already have orthonormal columns.
    """
    m, p = U.shape
    if p == 0:
        return np.eye(m)
    Qfull, _ = np.linalg.qr(U, mode="complete")
    return Qfull[:, p:]


def residual_energy(U, V):
    """Column-wise ``||(I - U U^T) v||^2`` for every column ``v`` of ``V``."""
    if U.shape[1] == 0:
        R = V
    else:
        # explicit residual, not ||v||^2 - ||U^T v||^2: keeps true zeros near 1e-30
        R = V - U @ (U.T @ V)
    return np.einsum("ij,ij->j", R, R)


def projector(U):
    return U @ U.T
