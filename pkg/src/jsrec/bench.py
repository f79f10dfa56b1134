"""Seeded, paired Monte Carlo experiments.

Each ``(k, trial)`` pair maps to one instance seed derived from the base seed
through ``numpy.random.SeedSequence``; every algorithm sees that same
instance. Work items are independent and aggregated as integer counts, so
results do not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from .asymptotics import MpMeasure
from .mmv import generate_instance, normalize_ensemble
from .recovery import PIPELINES, RecoveryError, recover

log = logging.getLogger(__name__)

DEFAULT_ALGORITHMS = ("cs_music_optimized", "cs_music", "sa_music", "somp")
DEFAULT_TRIALS = 500


@dataclass(frozen=True)
class ExperimentSpec:
    """A recovery-rate experiment. ``r=None`` means ``r = k`` at every ``k``."""

    m: int = 40
    n: int = 100
    r: int | None = 9
    k_min: int = 1
    k_max: int = 20
    snr_db: float | None = 40.0
    ensemble: str = "zero_mean"
    trials: int = DEFAULT_TRIALS
    algorithms: tuple = DEFAULT_ALGORITHMS
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ensemble", normalize_ensemble(self.ensemble))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not 0 < self.m < self.n:
            raise ValueError(f"require 0 < m < n, got m={self.m}, n={self.n}")
        if not 1 <= self.k_min <= self.k_max <= self.m - 1:
            raise ValueError(f"k range [{self.k_min}, {self.k_max}] must lie in [1, m-1={self.m - 1}]")
        if self.r is not None and self.r < 1:
            raise ValueError("r must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in PIPELINES:
                raise ValueError(f"unknown algorithm {a!r}; expected one of {sorted(PIPELINES)}")

    @property
    def k_range(self):
        return range(self.k_min, self.k_max + 1)

    def snapshots(self, k):
        return k if self.r is None else self.r

    def describe(self):
        d = asdict(self)
        d["r"] = "k" if self.r is None else self.r
        d["snr_db"] = "none" if self.snr_db is None else self.snr_db
        d["algorithms"] = " ".join(self.algorithms)
        return d


PRESETS = {
    "fig1a": ExperimentSpec(ensemble="zero_mean"),
    "fig1b": ExperimentSpec(ensemble="unit_mean"),
}


def instance_seed(base_seed, k, trial):
    """64-bit instance seed mixed from ``(base_seed, k, trial)``."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(k), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CurvePoint:
    algorithm: str
    k: int
    trials: int
    successes: int
    errors: int = 0

    @property
    def rate(self):
        return self.successes / self.trials

    @property
    def stderr(self):
        p = self.rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    @property
    def ci95(self):
        return 1.96 * self.stderr


@dataclass
class RecoveryCurve:
    spec: ExperimentSpec
    points: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.points[key]

    def rate(self, algorithm, k):
        return self.points[(algorithm, k)].rate

    def rates(self, algorithm):
        return np.array([self.rate(algorithm, k) for k in self.spec.k_range])

    def to_csv(self):
        lines = [f"# {key}={value}" for key, value in self.spec.describe().items()]
        lines.append("algorithm,k,trials,successes,rate,ci95")
        for alg in self.spec.algorithms:
            for k in self.spec.k_range:
                p = self.points[(alg, k)]
                lines.append(f"{alg},{k},{p.trials},{p.successes},{p.rate:.6f},{p.ci95:.6f}")
        return "\n".join(lines) + "\n"

    def plot_data(self, algorithm):
        """Two-column ``k rate`` text for gnuplot."""
        rows = [f"# {algorithm}"] + [f"{k} {self.rate(algorithm, k):.6f}" for k in self.spec.k_range]
        return "\n".join(rows) + "\n"

    def write(self, path, plot_dir=None):
        path = Path(path)
        path.write_text(self.to_csv())
        if plot_dir is not None:
            plot_dir = Path(plot_dir)
            plot_dir.mkdir(parents=True, exist_ok=True)
            for alg in self.spec.algorithms:
                (plot_dir / f"{path.stem}_{alg}.dat").write_text(self.plot_data(alg))


def _run_trial(spec, k, trial):
    seed = instance_seed(spec.base_seed, k, trial)
    inst = generate_instance(spec.m, spec.n, k, spec.snapshots(k), spec.snr_db,
                             spec.ensemble, seed)
    truth = inst.S.as_set()
    A = inst.A.entries
    out = {}
    for alg in spec.algorithms:
        try:
            ok = recover(alg, A, inst.Y, k).as_set() == truth
            out[alg] = (int(ok), 0)
        except (RecoveryError, ValueError, np.linalg.LinAlgError) as exc:
            log.debug("algorithm %s failed on k=%d trial=%d: %s", alg, k, trial, exc)
            out[alg] = (0, 1)
    return out


def _run_block(args):
    spec, k, trials = args
    counts = {alg: [0, 0] for alg in spec.algorithms}
    for t in trials:
        for alg, (s, e) in _run_trial(spec, k, t).items():
            counts[alg][0] += s
            counts[alg][1] += e
    return k, counts


def worker_count():
    env = os.environ.get("JSREC_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            log.warning("ignoring non-integer JSREC_THREADS=%r", env)
    return cpus


def run_experiment(spec: ExperimentSpec, workers=None, block_size=50):
    """Paired-trial exact-recovery rates for every algorithm and every ``k``."""
    workers = worker_count() if workers is None else max(1, int(workers))
    blocks = [(spec, k, range(start, min(start + block_size, spec.trials)))
              for k in spec.k_range for start in range(0, spec.trials, block_size)]
    totals = {(alg, k): [0, 0] for alg in spec.algorithms for k in spec.k_range}
    if workers == 1 or len(blocks) == 1:
        results = map(_run_block, blocks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_block, blocks)
    try:
        for k, counts in results:
            for alg, (s, e) in counts.items():
                totals[(alg, k)][0] += s
                totals[(alg, k)][1] += e
    finally:
        if workers != 1 and len(blocks) != 1:
            pool.shutdown()
    curve = RecoveryCurve(spec)
    for (alg, k), (s, e) in totals.items():
        if e:
            log.info("%s: %d/%d trials errored at k=%d (counted as failures)", alg, e, spec.trials, k)
        curve.points[(alg, k)] = CurvePoint(alg, k, spec.trials, s, e)
    return curve


# --- random-matrix validators ------------------------------------------------

@dataclass(frozen=True)
class ChiMaxStats:
    ratio_mean: float
    ratio_sd: float

    @property
    def band(self):
        """Worst distance of ``mean +- 2 sd`` from the limit 1."""
        return abs(self.ratio_mean - 1.0) + 2.0 * self.ratio_sd


def empirical_chi_max(n_vars, r_dof, trials, seed=0, sampler="draws"):
    """Statistics of ``max_j u_j / (2 ln n)`` over ``trials`` draws of ``n`` i.i.d. chi^2(r).

    ``sampler="draws"`` generates all ``n`` variates per trial.
    ``"order_statistic"`` samples the maximum directly from its law
    ``F^n`` by inverting ``U^(1/n)``, which costs O(1) per trial.
    """
    if n_vars < 1000:
        raise ValueError("n_vars must be >= 1000")
    rng = np.random.default_rng(seed)
    scale = 2.0 * math.log(n_vars)
    if sampler == "draws":
        ratios = np.array([rng.chisquare(r_dof, n_vars).max() / scale for _ in range(trials)])
    elif sampler == "order_statistic":
        tail = -np.expm1(np.log(rng.random(trials)) / n_vars)
        ratios = stats.chi2.isf(tail, r_dof) / scale
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    return ChiMaxStats(float(ratios.mean()), float(ratios.std(ddof=1)) if trials > 1 else 0.0)


def _gaussian_block(rng, m, k):
    return rng.standard_normal((m, k)) / math.sqrt(m)


def _mp_cdf_table(gamma, nodes=4001):
    """MP CDF on a uniform grid of the angle ``theta`` (smooth in theta)."""
    mp = MpMeasure(gamma)
    theta = np.linspace(0.0, math.pi / 2, nodes)
    pieces = [integrate.quad(mp._integrand, a, b, args=(0,), epsabs=1e-14, epsrel=1e-12)[0]
              for a, b in zip(theta[:-1], theta[1:])]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    return mp, theta, cdf


def empirical_mp(m, k, trials, seed=0):
    """Kolmogorov distance between pooled squared singular values and the MP law.

    Samples ``trials`` matrices ``m x k`` with N(0, 1/m) entries,
    ``gamma = sqrt(k/m)``.
    """
    if not 0 < k <= m:
        raise ValueError("require 0 < k <= m")
    gamma = math.sqrt(k / m)
    rng = np.random.default_rng(seed)
    samples = np.sort(np.concatenate([
        np.linalg.svd(_gaussian_block(rng, m, k), compute_uv=False) ** 2 for _ in range(trials)]))
    mp, theta, cdf = _mp_cdf_table(gamma)
    lo, hi = mp.support_lo, mp.support_hi
    th = np.arcsin(np.sqrt(np.clip((samples - lo) / (hi - lo), 0.0, 1.0)))
    F = np.interp(th, theta, cdf)
    N = samples.size
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def empirical_lower_singular_sum(m, k, r_frac, trials, seed=0):
    """Mean of (sum of the ``floor(r_frac k)`` smallest squared singular values of ``A_S``) / ``k``."""
    r = math.floor(r_frac * k + 1e-9)
    if r < 1:
        raise ValueError("floor(r_frac * k) must be >= 1")
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(trials):
        s2 = np.sort(np.linalg.svd(_gaussian_block(rng, m, k), compute_uv=False) ** 2)
        vals.append(s2[:r].sum() / k)
    return float(np.mean(vals))
