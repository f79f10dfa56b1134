"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_matrix(M, name="array", allow_1d=False):
    """Real, finite, float64 2-D array (1-D promoted to a single column)."""
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise ValueError(f"{name} must be real-valued")
    if allow_1d and M.ndim == 1:
        M = M[:, None]
    return check_array(M, dtype=np.float64, ensure_2d=True, ensure_all_finite=True,
                       input_name=name, copy=False)


def check_sensing_pair(A, Y):
    A = check_matrix(A, "A")
    Y = check_matrix(Y, "Y", allow_1d=True)
    if A.shape[0] != Y.shape[0]:
        raise ValueError(
            f"A has {A.shape[0]} rows but Y has {Y.shape[0]}; both must have m rows")
    return A, Y


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_indices(indices, n, name="indices"):
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} must lie in [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError(f"{name} contains duplicates")
    return idx
