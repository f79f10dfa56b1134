"""Property suites run by ``jsrec verify`` and by the acceptance tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .bench import empirical_chi_max, empirical_lower_singular_sum, empirical_mp
from .mmv import canonicalize, generate_instance
from .recovery import _gmusic, _subspace_fit, music


@dataclass
class SuiteResult:
    name: str
    passed: bool
    lines: list = field(default_factory=list)
    seconds: float = 0.0

    def report(self, timing=False):
        """Text block; wall-clock time only on request so reruns compare equal."""
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"
        if timing:
            head += f" ({self.seconds:.2f}s)"
        return "\n".join([head] + [f"    {line}" for line in self.lines])


def gmusic_iff(seeds=100, m=20, n=40, base_seed=2000):
    """Generalized MUSIC statistic vanishes exactly on the unknown support (noiseless)."""
    worst_true, worst_ratio, failures = 0.0, math.inf, 0
    for s in range(seeds):
        rng = np.random.default_rng([base_seed, s])
        k = int(rng.integers(4, 9))
        r = int(rng.integers(2, k))
        inst = generate_instance(m, n, k, r, None, "zero_mean", base_seed * 1000 + s)
        B = canonicalize(inst.Y).B
        S = inst.S.indices
        I = rng.choice(S, size=k - r, replace=False)
        rest, eta = _gmusic(inst.A.entries, B, list(I))
        in_S = np.isin(rest, S)
        hi = float(eta[in_S].max())
        lo = float(eta[~in_S].min())
        worst_true = max(worst_true, hi)
        worst_ratio = min(worst_ratio, lo / hi if hi > 0 else math.inf)
        if not (hi < 1e-10 and lo > 1e3 * hi):
            failures += 1
    lines = [f"seeds={seeds} failures={failures}",
             f"max eta on S\\I = {worst_true:.3e}", f"min separation ratio = {worst_ratio:.3e}"]
    return failures == 0, lines


def subspace_fit_iff(seeds=100, m=20, n=40, k=6, r=3, base_seed=4000):
    """Subspace fitting ranks every correct candidate ahead of every wrong one."""
    failures, worst_true, best_false = 0, 0.0, math.inf
    size = min(k, m - r + 1)
    n_correct = k - r + 1
    for s in range(seeds):
        rng = np.random.default_rng([base_seed, s])
        inst = generate_instance(m, n, k, r, None, "zero_mean", base_seed * 1000 + s)
        S = inst.S.indices
        off = np.setdiff1d(np.arange(n), S)
        I = np.concatenate([rng.choice(S, n_correct, replace=False),
                            rng.choice(off, size - n_correct, replace=False)])
        rng.shuffle(I)
        zeta = _subspace_fit(inst.A.entries, canonicalize(inst.Y).B, I)
        correct = np.isin(I, S)
        order = np.argsort(zeta, kind="stable")
        ok = bool(np.all(correct[order[:n_correct]])) and not np.any(correct[order[n_correct:]])
        failures += not ok
        worst_true = max(worst_true, float(zeta[correct].max()))
        best_false = min(best_false, float(zeta[~correct].min()))
    lines = [f"seeds={seeds} failures={failures}",
             f"max zeta on correct = {worst_true:.3e}", f"min zeta on wrong = {best_false:.3e}"]
    return failures == 0, lines


def music_ceiling(trials=100, m=40, n=100, k_max=39, base_seed=6000):
    """Noiseless MUSIC with r = k recovers every support up to k = m - 1."""
    worst = (1.0, None)
    for k in range(1, k_max + 1):
        hits = 0
        for t in range(trials):
            inst = generate_instance(m, n, k, k, None, "zero_mean", base_seed * 10**6 + k * 10**4 + t)
            hits += music(inst.A.entries, inst.Y, k).as_set() == inst.S.as_set()
        if hits / trials < worst[0]:
            worst = (hits / trials, k)
    ok = worst[0] == 1.0
    return ok, [f"k=1..{k_max}, trials={trials}: min rate {worst[0]:.3f}"
                + ("" if ok else f" at k={worst[1]}")]


def big_f(grid=1000, oracle_points=10**6):
    f1 = asy.big_F(1.0)
    f_small = asy.big_F(1e-4)
    alphas = np.linspace(1e-3, 1.0, grid)
    vals = np.array([asy.big_F(a) for a in alphas])
    monotone = bool(np.all(np.diff(vals) > 0))
    oracle = f_oracle(0.5, oracle_points)
    f_half = asy.big_F(0.5)
    checks = [abs(f1 - 1.0) <= 1e-8, f_small < 1e-2, monotone, abs(f_half - oracle) <= 1e-6]
    lines = [f"F(1) = {f1:.12f}", f"F(1e-4) = {f_small:.3e}", f"monotone on {grid} points: {monotone}",
             f"F(0.5) = {f_half:.10f}, table oracle = {oracle:.10f}"]
    return all(checks), lines


def f_oracle(alpha, points=10**6):
    """F(alpha) from a trapezoid CDF table of the gamma = 1 law in ``u = sqrt(x)``.

    In that variable the measure is ``sqrt(4 - u^2) / pi du`` on [0, 2], free of
    the pole at the origin. Independent of the quadrature path in ``asymptotics``.
    """
    u = np.linspace(0.0, 2.0, points)
    dens = np.sqrt(np.clip(4.0 - u * u, 0.0, None)) / math.pi
    du = u[1] - u[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * du)])
    first = u * u * dens
    mom = np.concatenate([[0.0], np.cumsum(0.5 * (first[1:] + first[:-1]) * du)])
    u_alpha = np.interp(alpha, cdf, u)
    # refine the last partial cell with the local trapezoid
    i = int(np.searchsorted(u, u_alpha)) - 1
    frac_mom = mom[i] + 0.5 * (first[i] + u_alpha ** 2 * math.sqrt(4 - u_alpha ** 2) / math.pi) \
        * (u_alpha - u[i])
    return frac_mom / alpha


def somp_endpoints(k=10):
    low = asy.somp_sample_bound(k, 10 * k, regime="proportional_r", alpha=1e-4, delta=0.0)
    full = asy.somp_sample_bound(k, 10 * k, regime="proportional_r", alpha=1.0, delta=0.0)
    ok = abs(low - 4 * k) <= 0.01 * 4 * k and full == k
    return ok, [f"alpha=1e-4: {low:.6f} (4k = {4 * k})", f"alpha=1: {full:.6f} (k = {k})"]


def marchenko_pastur(m=1000, k=250, trials=20, gamma1_m=500, seed=0):
    d = empirical_mp(m, k, trials, seed)
    d1 = empirical_mp(gamma1_m, gamma1_m, trials, seed + 1)
    ok = d < 0.02 and d1 < 0.03
    return ok, [f"m={m} k={k}: sup CDF deviation {d:.4f} (< 0.02)",
                f"gamma=1 m=k={gamma1_m}: {d1:.4f} (< 0.03)"]


def chi_max(n_small=10**5, n_large=10**6, r=1, trials=200, seed=0, sampler="draws"):
    a = empirical_chi_max(n_small, r, trials, seed, sampler)
    b = empirical_chi_max(n_large, r, trials, seed + 1, sampler)
    ok = 0.85 <= a.ratio_mean <= 1.15 and b.band < a.band
    return ok, [f"n={n_small}: mean {a.ratio_mean:.4f} sd {a.ratio_sd:.4f} band {a.band:.4f}",
                f"n={n_large}: mean {b.ratio_mean:.4f} sd {b.ratio_sd:.4f} band {b.band:.4f}"]


def chi_tail(draws=10**6, r=100, eps=0.5, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.chisquare(r, draws)
    bounds = asy.chi_tail_bounds(r, eps)
    p_up = float(np.mean(z > (1 + eps) * r))
    p_lo = float(np.mean(z < (1 - eps) * r))
    ok = p_up <= bounds["upper"] and p_lo <= bounds["lower"]
    return ok, [f"P(Z > {(1 + eps) * r:g}) = {p_up:.3e} <= {bounds['upper']:.3e}",
                f"P(Z < {(1 - eps) * r:g}) = {p_lo:.3e} <= {bounds['lower']:.3e}"]


def matched_mass_moments(gammas=(0.3, 0.6, 0.9), alphas=(0.2, 0.5, 0.8), grid=401):
    """Matched-mass moment inequality and the CDF ordering it rests on."""
    lines, ok = [], True
    for g in gammas:
        w = lambda s, g=g: (1 - g) ** 2 + g * s
        for a in alphas:
            lhs = asy.mp_shifted_moment(asy.mp_shifted_quantile(a, g), g, w)
            rhs = (1 - g) ** 2 * a + g * a * asy.big_F(a)
            ok &= lhs >= rhs - 1e-12
            lines.append(f"gamma={g} alpha={a}: {lhs:.6f} >= {rhs:.6f}")
        ts = np.linspace(0.0, 4.0, grid)
        gap = min(asy.MpMeasure(1.0).cdf(t) - asy.mp_shifted_moment(t, g) for t in ts)
        ok &= gap >= -1e-12
        lines.append(f"gamma={g}: min_t [CDF_1(t) - CDF_0,gamma(t)] = {gap:.2e}")
    return bool(ok), lines


def lower_singular_sum(m=2000, k=500, r_frac=0.5, trials=20, seed=0):
    gamma = math.sqrt(k / m)
    emp = empirical_lower_singular_sum(m, k, r_frac, trials, seed)
    bound = asy.lower_singular_sum_bound(r_frac, gamma)
    limit = asy.lower_singular_sum_limit(r_frac, gamma)
    return emp >= bound - 0.02, [f"empirical {emp:.4f}, limit {limit:.4f}, bound {bound:.4f}"]


SUITES = {
    "gmusic-iff": (gmusic_iff, dict(seeds=20)),
    "fit-iff": (subspace_fit_iff, dict(seeds=20)),
    "music": (music_ceiling, dict(trials=10)),
    "F": (big_f, dict(grid=200)),
    "somp-bound": (somp_endpoints, {}),
    "mp": (marchenko_pastur, dict(trials=5, m=1000, k=250)),
    "chimax": (chi_max, dict(sampler="order_statistic")),
    "chitail": (chi_tail, dict(draws=10**5)),
    "moment-order": (matched_mass_moments, dict(grid=41)),
    "singular-sum": (lower_singular_sum, dict(trials=5)),
}


# names accepted on the command line in addition to the keys above
SUITE_ALIASES = {"theorem2": "gmusic-iff", "theorem4": "fit-iff"}


def run_suite(name, quick=False, **params):
    name = SUITE_ALIASES.get(name, name)
    fn, quick_params = SUITES[name]
    kwargs = dict(quick_params) if quick else {}
    kwargs.update({k: v for k, v in params.items() if v is not None})
    t0 = time.perf_counter()
    ok, lines = fn(**kwargs)
    return SuiteResult(name, bool(ok), lines, time.perf_counter() - t0)
