import itertools

import numpy as np
import pytest


def subset_residual(A, Y, T):
    """||P_perp[A_T] Y||_F^2 by least squares (independent of the library's projectors)."""
    coef, *_ = np.linalg.lstsq(A[:, list(T)], Y, rcond=None)
    R = Y - A[:, list(T)] @ coef
    return float(np.sum(R * R))


def best_subset(A, Y, size, pool):
    """Exhaustive least-squares search for the best ``size``-subset of ``pool``."""
    best, arg = np.inf, None
    for T in itertools.combinations(pool, size):
        v = subset_residual(A, Y, T)
        if v < best:
            best, arg = v, set(T)
    return arg


def proj(M):
    """Orthogonal projector onto range(M) via the pseudo-inverse."""
    return M @ np.linalg.pinv(M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
