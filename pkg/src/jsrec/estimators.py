"""scikit-learn style wrappers around the recovery pipelines.

The sensing matrix plays the role of the design matrix and the snapshots the
(multi-output) target, as in :class:`sklearn.linear_model.OrthogonalMatchingPursuit`::

    est = CompressiveMUSIC(n_nonzero_rows=14, optimized=True).fit(A, Y)
    est.support_            # sorted 0-based row indices
    est.predict(A)          # least-squares refit on the support

Only the support is the algorithmic output; ``coef_`` is a plain
least-squares refit provided for ecosystem compatibility.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import recovery
from ._validation import check_matrix, check_sensing_pair
from .mmv import canonicalize


class _SupportEstimatorBase(RegressorMixin, BaseEstimator):

    def _recover(self, A, Y):
        raise NotImplementedError

    def fit(self, X, y):
        """Recover the joint support from sensing matrix ``X`` (m x n) and snapshots ``y`` (m x r)."""
        A, Y = check_sensing_pair(X, y)
        est = self._recover(A, Y)
        self.estimate_ = est
        self.support_ = est.support.indices.copy()
        self.partial_support_ = np.asarray(est.partial.indices, dtype=np.intp)
        self.criterion_values_ = dict(est.criterion_values)
        self.n_features_in_ = A.shape[1]
        self._single_target = np.ndim(y) == 1
        coef = np.zeros((Y.shape[1], A.shape[1]))
        sol, *_ = np.linalg.lstsq(A[:, self.support_], Y, rcond=None)
        coef[:, self.support_] = sol.T
        self.coef_ = coef[0] if self._single_target else coef
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        A = check_matrix(X, "X")
        return A @ self.coef_.T


class MUSIC(_SupportEstimatorBase):
    """Classical MUSIC; needs ``rank(Y) >= n_nonzero_rows``."""

    def __init__(self, n_nonzero_rows=1, rank_tol=None):
        self.n_nonzero_rows = n_nonzero_rows
        self.rank_tol = rank_tol

    def _recover(self, A, Y):
        return recovery.music(A, Y, self.n_nonzero_rows, rank_tol=self.rank_tol)


class SOMP(_SupportEstimatorBase):
    """Greedy joint support recovery run for ``n_nonzero_rows`` steps.

    ``solver`` is ``"somp"``, ``"ssomp"`` or ``"thresh2"``.
    """

    def __init__(self, n_nonzero_rows=1, solver="somp", rank_tol=None):
        self.n_nonzero_rows = n_nonzero_rows
        self.solver = solver
        self.rank_tol = rank_tol

    def _recover(self, A, Y):
        return recovery.greedy_support(A, Y, self.n_nonzero_rows, self.solver,
                                       rank_tol=self.rank_tol)


class CompressiveMUSIC(_SupportEstimatorBase):
    """Compressive MUSIC, optionally with the subspace-fitting partial support.

    Parameters
    ----------
    n_nonzero_rows : int
        Sparsity level ``k``.
    step1 : str or callable
        Greedy first stage, ``"somp"``, ``"ssomp"``, ``"thresh2"`` or
        ``solver(A, B, t)``.
    optimized : bool
        Choose the ``k - r`` partial support out of a ``k``-sparse step-1
        estimate by subspace fitting instead of trusting the first ``k - r``
        greedy picks.
    spark : int, optional
        Spark of the sensing matrix; see :func:`jsrec.recovery.cs_music_optimized`.
    """

    def __init__(self, n_nonzero_rows=1, step1="somp", optimized=True, rank_tol=None,
                 spark=None):
        self.n_nonzero_rows = n_nonzero_rows
        self.step1 = step1
        self.optimized = optimized
        self.rank_tol = rank_tol
        self.spark = spark

    def _recover(self, A, Y):
        if self.optimized:
            est = recovery.cs_music_optimized(A, Y, self.n_nonzero_rows, self.step1,
                                              rank_tol=self.rank_tol, spark=self.spark)
            self.fit_values_ = dict(est.fit_values)
            return est
        return recovery.cs_music(A, Y, self.n_nonzero_rows, self.step1, rank_tol=self.rank_tol)


class SubspaceAugmentedMUSIC(_SupportEstimatorBase):
    def __init__(self, n_nonzero_rows=1, step1="somp", rank_tol=None):
        self.n_nonzero_rows = n_nonzero_rows
        self.step1 = step1
        self.rank_tol = rank_tol

    def _recover(self, A, Y):
        return recovery.sa_music(A, Y, self.n_nonzero_rows, self.step1, rank_tol=self.rank_tol)


class Canonicalizer(TransformerMixin, BaseEstimator):
    """Reduce snapshots to canonical (full column rank) form.

    ``fit`` learns the right singular vectors of ``Y``; ``transform`` maps
    any ``m x r`` matrix with the same snapshots onto them.
    """

    def __init__(self, rank_tol=None, max_rank=None):
        self.rank_tol = rank_tol
        self.max_rank = max_rank

    def fit(self, X, y=None):
        canon = canonicalize(X, self.rank_tol)
        if self.max_rank is not None:
            canon = canon.truncate(self.max_rank)
        self.transform_ = canon.transform
        self.r_eff_ = canon.r_eff
        self.singular_values_ = canon.singular_values
        self.n_features_in_ = canon.transform.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        Y = check_matrix(X, "Y", allow_1d=True)
        if Y.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} snapshots, got {Y.shape[1]}")
        return Y @ self.transform_
