"""Joint support recovery: MUSIC, compressive MUSIC and their greedy front ends.

Every criterion that the theory states as "= 0 exactly on the support" is
used as a ranking (take the smallest values), so no absolute threshold is
needed at decision time. Ties in any argmax/argmin go to the smallest index.

Solver tags for the greedy first stage are ``"somp"``, ``"ssomp"`` (subspace
S-OMP) and ``"thresh2"`` (one-shot 2-thresholding); a callable
``solver(A, B, t) -> PartialSupport | sequence of indices`` may be passed
instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import default_rank_tol, orth, residual_energy
from ._validation import check_indices, check_matrix, check_positive_int, check_sensing_pair
from .mmv import CanonicalProblem, SupportSet, canonicalize, spark_bruteforce, \
    SPARK_BRUTEFORCE_MAX_N


class RecoveryError(ValueError):
    """A precondition of a recovery criterion does not hold on this input."""


class RankDeficientError(RecoveryError):
    pass


class LeftRIPViolation(RecoveryError):
    pass


class SnapshotCollapse(RecoveryError):
    pass


class AmbientDimensionError(RecoveryError):
    pass


@dataclass(frozen=True)
class NoiseSubspaceBasis:
    Q: np.ndarray

    @property
    def dim(self):
        return self.Q.shape[1]


@dataclass(frozen=True)
class PartialSupport:
    """Indices in selection order with the criterion value each had when picked."""

    indices: tuple
    scores: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("partial support contains duplicate indices")
        scores = tuple(float(s) for s in self.scores) if len(self.scores) else (np.nan,) * len(idx)
        if len(scores) != len(idx):
            raise ValueError("scores and indices differ in length")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


@dataclass(frozen=True)
class SupportEstimate:
    support: SupportSet
    partial: PartialSupport
    criterion_values: dict = field(default_factory=dict)
    # subspace fitting scores over the step-1 candidate set (optimized pipeline only)
    fit_values: dict = field(default_factory=dict)
    r_eff: int = 0

    def as_set(self):
        return self.support.as_set()


# --- canonical measurement helpers -----------------------------------------

def _signal_subspace(Y, k, rank_tol=None):
    """Canonical form of ``Y`` truncated to at most ``k`` dominant directions.

    Noisy snapshots are full rank ``min(m, r)``; the signal part has rank at
    most ``k``, so the extra directions are pure noise and are dropped.
    """
    return canonicalize(Y, rank_tol).truncate(k)


def _full_rank_B(B, rank_tol=None):
    B = check_matrix(B, "B", allow_1d=True)
    canon = canonicalize(B, rank_tol)
    return canon.B, canon.r_eff


# --- noise subspace and MUSIC ---------------------------------------------

def noise_subspace(B, r_eff=None, rank_tol=None):
    """Orthonormal basis ``Q`` of the orthogonal complement of ``span(B)``."""
    B = check_matrix(B, "B", allow_1d=True)
    m, r = B.shape
    if r_eff is None:
        r_eff = r
    if rank_tol is None:
        rank_tol = default_rank_tol(m, r)
    U, s, _ = np.linalg.svd(B, full_matrices=True)
    rank = int(np.count_nonzero(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    if rank != r_eff or r_eff != r:
        raise RankDeficientError(
            f"B must have full column rank {r}; numerical rank is {rank}. "
            "Canonicalize the measurements first")
    if r_eff >= m:
        raise RankDeficientError(f"rank(B)={r_eff} leaves no noise subspace in R^{m}")
    return NoiseSubspaceBasis(U[:, r_eff:])


def music_criterion(A, B):
    """``||Q^T a_j||^2`` for every column, computed as the residual off ``span(B)``."""
    return residual_energy(orth(B), A)


def _pick_smallest(values, candidates, count):
    order = np.argsort(values, kind="stable")
    return [int(candidates[i]) for i in order[:count]]


def _music(A, B, k):
    crit = music_criterion(A, B)
    chosen = _pick_smallest(crit, np.arange(A.shape[1]), k)
    return SupportEstimate(
        SupportSet(chosen, A.shape[1]), PartialSupport(()),
        {j: float(c) for j, c in enumerate(crit)}, r_eff=B.shape[1])


def music(A, B, k, rank_tol=None):
    """Classical MUSIC for the full-rank regime ``rank(B) == k``.

    If ``B`` has numerical rank above ``k`` (noisy snapshots), only its ``k``
    dominant directions are used.
    """
    A, B = check_sensing_pair(A, B)
    k = check_positive_int(k, "k")
    if k >= A.shape[0]:
        raise ValueError(f"MUSIC requires k < m, got k={k}, m={A.shape[0]}")
    canon = _signal_subspace(B, k, rank_tol)
    if canon.r_eff < k:
        raise RankDeficientError(
            f"MUSIC requires full-rank snapshots (rank {canon.r_eff} < k={k}); use cs_music")
    return _music(A, canon.B, k)


# --- generalized MUSIC ------------------------------------------------------

def _augmented_basis(A, B, idx, rank_tol=None):
    """Orthonormal basis of ``span([B, A_I])`` built as ``[orth(B), orth(P_Q A_I)]``."""
    Ub = orth(B)
    if len(idx) == 0:
        return Ub, Ub
    AI = A[:, idx]
    G = AI - Ub @ (Ub.T @ AI)
    W = orth(G, rank_tol)
    return np.hstack([Ub, W]), W


def generalized_music_stats(A, B, partial, rank_tol=None):
    """Generalized MUSIC statistic for every index outside ``partial``.

    ``eta(j) = a_j^T [P_Q - P_{P_Q A_I}] a_j`` with ``Q`` the noise subspace
    of ``B`` and ``I`` the partial support. Returns ``(indices, eta)``.
    """
    A, B = check_sensing_pair(A, B)
    return _gmusic(A, B, list(partial), rank_tol)


def _gmusic(A, B, idx, rank_tol=None):
    n = A.shape[1]
    idx = check_indices(idx, n, "partial")
    U, W = _augmented_basis(A, B, idx, rank_tol)
    if idx.size and W.shape[1] < idx.size:
        raise LeftRIPViolation(
            f"left-RIP violated: P_Q A_I has rank {W.shape[1]} < |I|={idx.size}")
    if U.shape[1] >= A.shape[0]:
        raise AmbientDimensionError("augmented subspace fills the ambient space")
    rest = np.setdiff1d(np.arange(n), idx)
    return rest, residual_energy(U, A[:, rest])


# --- greedy first stage -----------------------------------------------------

def _somp(A, Y, t):
    m, n = A.shape
    U = np.zeros((m, 0))
    R = Y
    chosen, scores = [], []
    mask = np.zeros(n, dtype=bool)
    for _ in range(t):
        C = A.T @ R
        s = np.einsum("ij,ij->i", C, C)
        s[mask] = -np.inf
        j = int(np.argmax(s))
        chosen.append(j)
        scores.append(float(s[j]))
        mask[j] = True
        v = A[:, j] - U @ (U.T @ A[:, j])
        v -= U @ (U.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-12 * max(np.linalg.norm(A[:, j]), 1e-300):
            U = np.hstack([U, (v / nv)[:, None]])
            R = Y - U @ (U.T @ Y)
    return PartialSupport(chosen, scores)


def somp(A, Y, t_steps):
    """Simultaneous OMP: greedily pick ``argmax_j ||a_j^T P_perp Y||^2``."""
    A, Y = check_sensing_pair(A, Y)
    t = check_positive_int(t_steps, "t_steps", minimum=0)
    if t > A.shape[0]:
        raise ValueError(f"t_steps={t} exceeds m={A.shape[0]}")
    return _somp(A, Y, t)


def _ssomp(A, B, t, rank_tol=None, strict=True):
    m, n = A.shape
    r_eff = orth(B, rank_tol).shape[1]
    U = np.zeros((m, 0))
    chosen, scores = [], []
    mask = np.zeros(n, dtype=bool)
    for step in range(t):
        P = B - U @ (U.T @ B)
        W = orth(P, rank_tol)
        if strict and W.shape[1] < r_eff:
            raise SnapshotCollapse(
                f"snapshot collapse at step {step}: projected B has rank "
                f"{W.shape[1]} < {r_eff}")
        C = W.T @ A
        rho = np.einsum("ij,ij->j", C, C)
        rho[mask] = -np.inf
        j = int(np.argmax(rho))
        chosen.append(j)
        scores.append(float(rho[j]))
        mask[j] = True
        v = A[:, j] - U @ (U.T @ A[:, j])
        v -= U @ (U.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-12 * max(np.linalg.norm(A[:, j]), 1e-300):
            U = np.hstack([U, (v / nv)[:, None]])
    return PartialSupport(chosen, scores)


def subspace_somp(A, Y, t_steps, rank_tol=None, strict=True):
    """Subspace S-OMP: correlate atoms with the orthonormalized projected snapshots.

    ``rho(t, j) = ||a_j^T P_{R(P_perp B)}||^2`` where ``B`` is the canonical
    form of ``Y`` and ``P_perp`` projects off the atoms chosen so far. With
    ``strict`` the call fails as soon as the projected snapshots lose rank;
    otherwise the remaining numerical rank is used.
    """
    A, Y = check_sensing_pair(A, Y)
    t = check_positive_int(t_steps, "t_steps", minimum=0)
    B = canonicalize(Y, rank_tol).B
    if t > A.shape[0] - B.shape[1]:
        raise ValueError(f"t_steps={t} exceeds m - r_eff = {A.shape[0] - B.shape[1]}")
    return _ssomp(A, B, t, rank_tol, strict)


def _thresh2(A, Y, t):
    C = A.T @ Y
    s = np.sqrt(np.einsum("ij,ij->i", C, C))
    order = np.argsort(-s, kind="stable")[:t]
    return PartialSupport(order.tolist(), s[order].tolist())


def two_thresholding(A, Y, t):
    """One-shot selection of the ``t`` atoms with largest ``||a_j^T Y||_2``."""
    A, Y = check_sensing_pair(A, Y)
    t = check_positive_int(t, "t", minimum=0)
    if t > A.shape[1]:
        raise ValueError(f"t={t} exceeds n={A.shape[1]}")
    return _thresh2(A, Y, t)


STEP1_TAGS = ("somp", "ssomp", "thresh2")


def _run_step1(step1, A, B, t, rank_tol=None, strict=True):
    if t == 0:
        return PartialSupport(())
    if callable(step1):
        out = step1(A, B, t)
        if not isinstance(out, PartialSupport):
            out = PartialSupport(list(out))
        if len(out) != t:
            raise RecoveryError(f"step-1 solver returned {len(out)} indices, expected {t}")
        check_indices(out.indices, A.shape[1], "step-1 output")
        return out
    if step1 == "somp":
        return _somp(A, B, t)
    if step1 == "ssomp":
        return _ssomp(A, B, t, rank_tol, strict)
    if step1 == "thresh2":
        return _thresh2(A, B, t)
    raise ValueError(f"unknown step-1 solver {step1!r}; expected one of {STEP1_TAGS}")


# --- compressive MUSIC pipelines -------------------------------------------

def _check_pipeline(A, Y, k):
    A, Y = check_sensing_pair(A, Y)
    k = check_positive_int(k, "k")
    if k >= A.shape[0]:
        raise ValueError(f"require k < m, got k={k}, m={A.shape[0]}")
    return A, Y, k


def _complete_with_gmusic(A, B, k, partial, rank_tol=None, fit_values=None):
    r = B.shape[1]
    rest, eta = _gmusic(A, B, list(partial.indices), rank_tol)
    tail = _pick_smallest(eta, rest, r)
    return SupportEstimate(
        SupportSet(list(partial.indices) + tail, A.shape[1]), partial,
        {int(j): float(e) for j, e in zip(rest, eta)}, fit_values or {}, r)


def cs_music(A, Y, k, step1="somp", rank_tol=None):
    """Compressive MUSIC.

    A greedy solver finds ``k - r`` support indices, then the generalized
    MUSIC statistic ranks the rest and the ``r`` smallest complete the support.
    """
    A, Y, k = _check_pipeline(A, Y, k)
    canon = _signal_subspace(Y, k, rank_tol)
    B, r = canon.B, canon.r_eff
    if r == k:
        return _music(A, B, k)
    partial = _run_step1(step1, A, B, k - r, rank_tol)
    return _complete_with_gmusic(A, B, k, partial, rank_tol)


def subspace_fit_stats(A, B, I_k, rank_tol=None):
    """Subspace fitting residual ``||P_perp[B, A_{I \\ j}] a_j||^2`` for each ``j`` in ``I_k``.

    Returns values aligned with ``I_k``.
    """
    A, B = check_sensing_pair(A, B)
    B, _ = _full_rank_B(B, rank_tol)
    return _subspace_fit(A, B, list(I_k), rank_tol)


def _subspace_fit(A, B, I_k, rank_tol=None):
    m = A.shape[0]
    idx = check_indices(I_k, A.shape[1], "I_k")
    if B.shape[1] + idx.size - 1 > m:
        raise AmbientDimensionError(
            f"augmented basis exceeds ambient dimension: {B.shape[1]} + {idx.size - 1} > m={m}")
    Ub = orth(B, rank_tol)
    zeta = np.empty(idx.size)
    for pos, j in enumerate(idx):
        others = np.delete(idx, pos)
        U, _ = _augmented_basis(A, B, others, rank_tol) if others.size else (Ub, None)
        zeta[pos] = residual_energy(U, A[:, [j]])[0]
    return zeta


def _resolve_spark(A, spark):
    if spark is not None:
        return int(spark)
    m, n = A.shape
    if n <= SPARK_BRUTEFORCE_MAX_N:
        return spark_bruteforce(A)
    # columns assumed in general position
    return m + 1


def cs_music_optimized(A, Y, k, step1="somp", rank_tol=None, spark=None):
    """Compressive MUSIC with the partial support chosen by subspace fitting.

    The greedy solver returns a full ``k``-sparse candidate set; the
    ``k - r`` members with the smallest subspace fitting residual become the
    partial support, and generalized MUSIC supplies the remaining ``r``.
    Needs only ``k - r + 1`` correct candidates, in any order.

    ``spark`` defaults to a brute-force computation for ``n <= 20`` and to
    ``m + 1`` (general position) otherwise.
    """
    A, Y, k = _check_pipeline(A, Y, k)
    canon = _signal_subspace(Y, k, rank_tol)
    B, r = canon.B, canon.r_eff
    if r == k:
        return _music(A, B, k)
    cand = _run_step1(step1, A, B, k, rank_tol, strict=False)
    size = min(k, _resolve_spark(A, spark) - r)
    if size < k - r + 1:
        raise RecoveryError(
            f"candidate set of size {size} cannot contain k - r + 1 = {k - r + 1} indices")
    idx = np.asarray(cand.indices)
    if size < idx.size:
        scores = np.asarray(cand.scores)
        keep = np.argsort(-scores, kind="stable")[:size]
        idx = idx[np.sort(keep)]
    zeta = _subspace_fit(A, B, idx, rank_tol)
    order = np.argsort(zeta, kind="stable")[:k - r]
    partial = PartialSupport(idx[order].tolist(), zeta[order].tolist())
    fit = {int(j): float(z) for j, z in zip(idx, zeta)}
    return _complete_with_gmusic(A, B, k, partial, rank_tol, fit)


def sa_music(A, Y, k, step1="somp", rank_tol=None):
    """Subspace-augmented MUSIC baseline.

    After ``k - r`` greedy picks ``I``, each remaining atom is scored by its
    normalized residual ``||P_perp[B, A_I] a_j||^2 / ||a_j||^2`` and the ``r``
    smallest are added. Noiseless, this selects the same indices as
    :func:`cs_music`; the column normalization makes it differ under noise.
    """
    A, Y, k = _check_pipeline(A, Y, k)
    canon = _signal_subspace(Y, k, rank_tol)
    B, r = canon.B, canon.r_eff
    if r == k:
        return _music(A, B, k)
    partial = _run_step1(step1, A, B, k - r, rank_tol)
    idx = np.asarray(partial.indices)
    U, W = _augmented_basis(A, B, idx, rank_tol)
    if U.shape[1] >= A.shape[0]:
        raise AmbientDimensionError("augmented subspace fills the ambient space")
    rest = np.setdiff1d(np.arange(A.shape[1]), idx)
    cols = A[:, rest]
    score = residual_energy(U, cols) / np.einsum("ij,ij->j", cols, cols)
    tail = _pick_smallest(score, rest, r)
    return SupportEstimate(
        SupportSet(list(idx) + tail, A.shape[1]), partial,
        {int(j): float(s) for j, s in zip(rest, score)}, r_eff=r)


def greedy_support(A, Y, k, solver="somp", rank_tol=None):
    """Run a greedy solver alone for ``k`` steps (the stand-alone baseline)."""
    A, Y, k = _check_pipeline(A, Y, k)
    if solver == "ssomp":
        B = _signal_subspace(Y, k, rank_tol).B
        partial = _ssomp(A, B, k, rank_tol, strict=False)
    else:
        partial = _run_step1(solver, A, Y, k, rank_tol)
    return SupportEstimate(SupportSet(list(partial.indices), A.shape[1]), partial,
                           dict(zip(partial.indices, partial.scores)))


PIPELINES = {
    "music": lambda A, Y, k, **kw: music(A, Y, k, **kw),
    "somp": lambda A, Y, k, **kw: greedy_support(A, Y, k, "somp", **kw),
    "ssomp": lambda A, Y, k, **kw: greedy_support(A, Y, k, "ssomp", **kw),
    "thresh2": lambda A, Y, k, **kw: greedy_support(A, Y, k, "thresh2", **kw),
    "cs_music": lambda A, Y, k, **kw: cs_music(A, Y, k, **kw),
    "cs_music_optimized": lambda A, Y, k, **kw: cs_music_optimized(A, Y, k, **kw),
    "sa_music": lambda A, Y, k, **kw: sa_music(A, Y, k, **kw),
}


def recover(algorithm, A, Y, k, **kwargs):
    """Dispatch to a named pipeline; see ``PIPELINES`` for the tags."""
    try:
        fn = PIPELINES[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(PIPELINES)}")
    return fn(A, Y, k, **kwargs)
