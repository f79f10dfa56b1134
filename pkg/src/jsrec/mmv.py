"""MMV problem representation: instances, canonical form and exact oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import default_rank_tol
from ._validation import check_indices, check_matrix, check_positive_int

ENSEMBLES = ("zero_mean", "unit_mean", "user_supplied")
_ENSEMBLE_ALIASES = {"zeromean": "zero_mean", "unitmean": "unit_mean"}

SPARK_BRUTEFORCE_MAX_N = 20


def normalize_ensemble(tag):
    tag = _ENSEMBLE_ALIASES.get(tag, tag)
    if tag not in ENSEMBLES:
        raise ValueError(f"unknown ensemble {tag!r}; expected one of {ENSEMBLES}")
    return tag


@dataclass(frozen=True)
class SupportSet:
    """Sorted, duplicate-free 0-based row indices of a jointly sparse signal."""

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.sort(check_indices(self.indices, self.n))
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, j):
        return bool(np.any(self.indices == j))

    def as_set(self):
        return set(self.indices.tolist())

    def one_based(self):
        return [int(i) + 1 for i in self.indices]


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray
    ensemble_tag: str = "user_supplied"

    def __post_init__(self):
        A = check_matrix(self.entries, "A")
        m, n = A.shape
        if not m < n:
            raise ValueError(f"sensing matrix must have m < n, got {m}x{n}")
        object.__setattr__(self, "entries", A)
        object.__setattr__(self, "ensemble_tag", normalize_ensemble(self.ensemble_tag))

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class JointSparseSignal:
    entries: np.ndarray
    support: SupportSet

    def __post_init__(self):
        X = check_matrix(self.entries, "X", allow_1d=True)
        nz = np.flatnonzero(np.any(X != 0, axis=1))
        if not np.array_equal(nz, self.support.indices):
            raise ValueError("nonzero rows of X do not match the declared support")
        object.__setattr__(self, "entries", X)

    @property
    def k(self):
        return len(self.support)


@dataclass(frozen=True)
class NoisyInstance:
    A: SensingMatrix
    X: JointSparseSignal
    Y: np.ndarray
    noise_std: float
    seed: int
    snr_db: float | None = None

    @property
    def S(self):
        return self.X.support

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def k(self):
        return self.X.k

    @property
    def r(self):
        return self.Y.shape[1]

    def metadata(self):
        return {
            "m": self.m, "n": self.n, "k": self.k, "r": self.r,
            "ensemble": self.A.ensemble_tag, "seed": self.seed,
            "snr_db": "none" if self.snr_db is None else repr(float(self.snr_db)),
        }


@dataclass(frozen=True)
class CanonicalProblem:
    """Rank-reduced measurement ``B = Y @ transform`` with ``rank(B) == r_eff``."""

    B: np.ndarray
    r_eff: int
    transform: np.ndarray
    singular_values: np.ndarray
    rank_tol: float

    def truncate(self, r_max):
        """Keep only the ``r_max`` dominant directions (signal subspace estimate)."""
        if r_max >= self.r_eff:
            return self
        return CanonicalProblem(self.B[:, :r_max], r_max, self.transform[:, :r_max],
                                self.singular_values, self.rank_tol)


def _sensing_matrix(rng, m, n, ensemble):
    G = rng.standard_normal((m, n))
    if ensemble == "unit_mean":
        G += 1.0
    return G / math.sqrt(m)


def generate_instance(m, n, k, r, snr_db=None, ensemble_tag="zero_mean", seed=0, A=None):
    """Draw a seeded random MMV instance ``Y = A X + N``.

    The support is uniform over all size-``k`` subsets and the nonzero rows of
    ``X`` are i.i.d. standard Gaussian. When ``snr_db`` is given, the noise
    level is calibrated per instance so that ``||A X||_F^2 / E||N||_F^2``
    equals ``10**(snr_db / 10)`` exactly.

    A fixed sensing matrix may be passed as ``A`` (tagged ``user_supplied``).
    """
    m = check_positive_int(m, "m")
    n = check_positive_int(n, "n")
    k = check_positive_int(k, "k")
    r = check_positive_int(r, "r")
    if not (0 < k < m < n):
        raise ValueError(f"require 0 < k < m < n, got k={k}, m={m}, n={n}")
    seed = int(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF))

    if A is None:
        ensemble_tag = normalize_ensemble(ensemble_tag)
        if ensemble_tag == "user_supplied":
            raise ValueError("ensemble 'user_supplied' needs an explicit A")
        A_entries = _sensing_matrix(rng, m, n, ensemble_tag)
    else:
        A_entries = check_matrix(A, "A")
        if A_entries.shape != (m, n):
            raise ValueError(f"A has shape {A_entries.shape}, expected {(m, n)}")
        ensemble_tag = "user_supplied"
    sensing = SensingMatrix(A_entries, ensemble_tag)

    support = np.sort(rng.choice(n, size=k, replace=False))
    X = np.zeros((n, r))
    X[support] = rng.standard_normal((k, r))
    signal = JointSparseSignal(X, SupportSet(support, n))

    AX = A_entries @ X
    if snr_db is None:
        return NoisyInstance(sensing, signal, AX, 0.0, seed, None)

    energy = float(np.sum(AX * AX))
    if energy == 0.0:
        raise ValueError("snr_db given but the signal has zero energy")
    snr = 10.0 ** (float(snr_db) / 10.0)
    noise_std = math.sqrt(energy / (m * r * snr))
    Y = AX + noise_std * rng.standard_normal((m, r))
    return NoisyInstance(sensing, signal, Y, noise_std, seed, float(snr_db))


def canonicalize(Y, rank_tol=None):
    """SVD rank reduction of the measurement matrix to canonical form.

    Returns ``B = Y V_kept`` whose columns span the same space as ``Y``
    (equivalently ``U_kept * s_kept``) with full column rank ``r_eff``.
    """
    Y = check_matrix(Y, "Y", allow_1d=True)
    m, r = Y.shape
    if rank_tol is None:
        rank_tol = default_rank_tol(m, r)
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("zero measurement: Y has no nonzero singular value")
    r_eff = int(np.count_nonzero(s > rank_tol * s[0]))
    B = U[:, :r_eff] * s[:r_eff]
    return CanonicalProblem(B, r_eff, Vt[:r_eff].T, s, float(rank_tol))


def spark_bruteforce(A, tol=1e-10):
    """Smallest number of linearly dependent columns, by exhaustive search.

    Returns ``n + 1`` when every column subset is independent. Refuses
    ``n > 20`` because the search is exponential.
    """
    A = check_matrix(A, "A")
    m, n = A.shape
    if n > SPARK_BRUTEFORCE_MAX_N:
        raise ValueError(
            f"spark_bruteforce refuses n={n} > {SPARK_BRUTEFORCE_MAX_N} (exponential cost)")
    scale = max(np.max(np.abs(A)), 1.0)
    for size in range(1, min(m, n) + 1):
        for cols in itertools.combinations(range(n), size):
            s = np.linalg.svd(A[:, cols], compute_uv=False)
            if s[-1] <= tol * scale * max(m, size):
                return size
    # any m + 1 vectors in R^m are dependent
    return m + 1 if m < n else n + 1


def l0_uniqueness_bound(spark_A, rank_B):
    """``(spark(A) + rank(B) - 1) / 2``; ``||X||_0`` must lie strictly below it."""
    if spark_A < 2:
        raise ValueError("spark_A must be >= 2")
    if rank_B < 1:
        raise ValueError("rank_B must be >= 1")
    return (spark_A + rank_B - 1) / 2.0


def support_distance(S, S_hat):
    """Number of true indices missed by an equal-size estimate, ``|S \\ S_hat|``."""
    S = set(_as_index_list(S))
    S_hat = set(_as_index_list(S_hat))
    if len(S) != len(S_hat):
        raise ValueError(f"support sizes differ: {len(S)} vs {len(S_hat)}")
    return len(S - S_hat)


def _as_index_list(S):
    if isinstance(S, SupportSet):
        return S.indices.tolist()
    return [int(i) for i in np.asarray(list(S) if isinstance(S, (set, frozenset)) else S).ravel()]


def snr_of(X, noise_std, n, r):
    """Signal-to-noise ratio ``||X||_F^2 / (r n sigma_w^2)``."""
    if noise_std == 0:
        raise ValueError("infinite SNR: noise_std is zero")
    if noise_std < 0:
        raise ValueError("noise_std must be positive")
    X = np.asarray(X, dtype=float)
    return float(np.sum(X * X)) / (r * n * noise_std ** 2)


# --- plain-text I/O -------------------------------------------------------

def save_matrix(path, M):
    np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=float)), delimiter=",", fmt="%.17g")


def load_matrix(path):
    return check_matrix(np.loadtxt(path, delimiter=",", ndmin=2), str(path))


def format_metadata(meta):
    return "".join(f"{key}={value}\n" for key, value in meta.items())


def parse_metadata(text):
    meta = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed metadata line: {line!r}")
        meta[key.strip()] = value.strip()
    return meta


def save_instance(directory, instance):
    """Write ``A.csv``, ``X.csv``, ``Y.csv`` and ``meta.txt`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_matrix(d / "A.csv", instance.A.entries)
    save_matrix(d / "X.csv", instance.X.entries)
    save_matrix(d / "Y.csv", instance.Y)
    meta = instance.metadata()
    meta["noise_std"] = repr(float(instance.noise_std))
    (d / "meta.txt").write_text(format_metadata(meta))


def load_instance(directory):
    d = Path(directory)
    meta = parse_metadata((d / "meta.txt").read_text())
    A = SensingMatrix(load_matrix(d / "A.csv"), meta.get("ensemble", "user_supplied"))
    X = load_matrix(d / "X.csv")
    support = SupportSet(np.flatnonzero(np.any(X != 0, axis=1)), X.shape[0])
    snr_db = meta.get("snr_db", "none")
    return NoisyInstance(
        A, JointSparseSignal(X, support), load_matrix(d / "Y.csv"),
        float(meta.get("noise_std", 0.0)), int(meta.get("seed", 0)),
        None if snr_db == "none" else float(snr_db))


def regenerate(meta):
    """Rebuild an instance bit-for-bit from its metadata block."""
    snr_db = meta.get("snr_db", "none")
    return generate_instance(
        int(meta["m"]), int(meta["n"]), int(meta["k"]), int(meta["r"]),
        None if snr_db in ("none", None) else float(snr_db),
        meta["ensemble"], int(meta["seed"]))
