"""Closed-form sampling bounds and the random-matrix quantities behind them.

All logarithms are natural, so entropies are in nats.

Marchenko-Pastur integrals are evaluated after the substitution
``x = lo + (hi - lo) sin^2(theta)``, which turns the square-root endpoint
behaviour (and the ``1/sqrt(x)`` pole of the ``gamma = 1`` law) into a smooth
integrand that adaptive Gauss-Kronrod quadrature handles to ~1e-13.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


# --- Marchenko-Pastur -------------------------------------------------------

@dataclass(frozen=True)
class MpMeasure:
    """Squared-singular-value law of an ``m x k`` matrix with N(0, 1/m) entries, ``gamma = sqrt(k/m)``."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    @property
    def support_lo(self):
        return (1.0 - self.gamma) ** 2

    @property
    def support_hi(self):
        return (1.0 + self.gamma) ** 2

    def pdf(self, x):
        return mp_density(x, self.gamma)

    def _theta(self, x):
        lo, hi = self.support_lo, self.support_hi
        u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        return float(np.arcsin(np.sqrt(u)))

    def _integrand(self, theta, power):
        lo, hi = self.support_lo, self.support_hi
        s, c = math.sin(theta), math.cos(theta)
        x = lo + (hi - lo) * s * s
        # density * dx / dtheta, with the sqrt and 1/x factors cancelled analytically
        base = (hi - lo) ** 2 * 2.0 * s * s * c * c / (2.0 * math.pi * self.gamma ** 2)
        if power == 0:
            return base / x if x > 0 else 4.0 * c * c / math.pi
        return base * x ** (power - 1)

    def moment(self, upper, power=0, lower=None):
        """``int_lower^upper x^power dlambda_gamma(x)`` (``lower`` defaults to the support start)."""
        t_hi = self._theta(upper)
        t_lo = 0.0 if lower is None else self._theta(lower)
        if t_hi <= t_lo:
            return 0.0
        val, _ = integrate.quad(self._integrand, t_lo, t_hi, args=(power,), **_QUAD_OPTS)
        return val

    def cdf(self, x):
        return self.moment(x, 0)

    def quantile(self, mass):
        """Point ``q`` with ``cdf(q) == mass``."""
        if mass <= 0.0:
            return self.support_lo
        if mass >= 1.0:
            return self.support_hi
        return optimize.brentq(lambda q: self.cdf(q) - mass, self.support_lo, self.support_hi,
                               xtol=1e-15, rtol=4 * np.finfo(float).eps)


def mp_density(x, gamma):
    """Marchenko-Pastur density ``sqrt((hi - x)(x - lo)) / (2 pi gamma^2 x)`` on ``[lo, hi]``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    x = np.asarray(x, dtype=float)
    lo, hi = (1.0 - gamma) ** 2, (1.0 + gamma) ** 2
    inside = (x > lo) & (x < hi) & (x > 0)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * math.pi * gamma ** 2 * xi)
    return out if out.ndim else float(out)


def mp_shifted_density(s, gamma):
    """Law of ``(x - (1 - gamma)^2) / gamma`` for ``x ~ dlambda_gamma``, supported on ``[0, 4]``.

    ``sqrt(s (4 - s)) / (2 pi (gamma s + (1 - gamma)^2))``; equals ``dlambda_1`` at ``gamma = 1``.
    """
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 4)
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.sqrt(si * (4.0 - si)) / (2.0 * math.pi * (gamma * si + (1.0 - gamma) ** 2))
    return out if out.ndim else float(out)


def mp_shifted_moment(upper, gamma, weight=None):
    """``int_0^upper w(s) dlambda_{0,gamma}(s)`` by the same sin^2 substitution (``s = 4 sin^2``)."""
    t_hi = float(np.arcsin(np.sqrt(np.clip(upper / 4.0, 0.0, 1.0))))
    g2 = (1.0 - gamma) ** 2

    def f(theta):
        sn, cs = math.sin(theta), math.cos(theta)
        s = 4.0 * sn * sn
        # sqrt(s(4-s)) ds = 16 sn^2 cs^2 * 2 dtheta
        val = 32.0 * sn * sn * cs * cs / (2.0 * math.pi * (gamma * s + g2)) if gamma * s + g2 > 0 \
            else 4.0 * cs * cs / math.pi
        return val * (1.0 if weight is None else weight(s))

    if t_hi <= 0.0:
        return 0.0
    val, _ = integrate.quad(f, 0.0, t_hi, **_QUAD_OPTS)
    return val


def mp_shifted_quantile(mass, gamma):
    if mass <= 0.0:
        return 0.0
    if mass >= 1.0:
        return 4.0
    return optimize.brentq(lambda u: mp_shifted_moment(u, gamma) - mass, 0.0, 4.0,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)


_MP1 = MpMeasure(1.0)


def t_gamma_of_alpha(alpha, gamma):
    """``t`` in [0, 1] with ``lambda_gamma([lo, (1 - gamma + 2 gamma t)^2]) == alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return 0.0
    q = MpMeasure(gamma).quantile(alpha)
    return (math.sqrt(q) - (1.0 - gamma)) / (2.0 * gamma)


def t1_of_alpha(alpha):
    """Root ``t_1`` of ``int_0^{4 t^2} dlambda_1 = alpha``; 0 at ``alpha = 0``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return 0.0
    if alpha == 1.0:
        return 1.0
    return math.sqrt(_MP1.quantile(alpha)) / 2.0


def big_F(alpha):
    """Mean of the lowest ``alpha`` fraction of the ``gamma = 1`` law.

    ``F(alpha) = (1/alpha) int_0^{4 t_1(alpha)^2} x dlambda_1(x)``; increasing,
    ``F(1) = 1`` and ``F -> 0`` as ``alpha -> 0``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    upper = 4.0 * t1_of_alpha(alpha) ** 2
    return _MP1.moment(upper, 1) / alpha


def lower_singular_sum_limit(alpha, gamma):
    """Limit of (sum of the ``alpha k`` smallest squared singular values of ``A_S``) / ``k``."""
    if alpha <= 0.0:
        return 0.0
    mp = MpMeasure(gamma)
    return mp.moment(mp.quantile(alpha), 1)


def lower_singular_sum_bound(alpha, gamma):
    """``alpha (1 - gamma)^2 + alpha gamma F(alpha)``, i.e. ``(r/m)(1/gamma - 1)^2 + alpha gamma F(alpha)``."""
    return alpha * (1.0 - gamma) ** 2 + alpha * gamma * big_F(alpha)


def somp_sample_bound(k, n, r=None, delta=0.0, regime="fixed_r", alpha=None):
    """Threshold on ``m`` above which subspace S-OMP finds ``k - r`` support indices.

    ``fixed_r``: ``k (1 + delta) 2 ln(n - k) / r``.
    ``proportional_r``: ``k (1 + delta)^2 (2 - F(alpha))^2`` with ``alpha = r/k``
    (pass ``alpha`` directly to evaluate the limit without an integer ``r``).
    """
    if k >= n:
        raise ValueError(f"require k < n, got k={k}, n={n}")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if regime == "fixed_r":
        if r is None or r < 1:
            raise ValueError("fixed_r regime needs r >= 1")
        return k * (1.0 + delta) * 2.0 * math.log(n - k) / r
    if regime == "proportional_r":
        if alpha is None:
            if r is None:
                raise ValueError("proportional_r regime needs alpha or r")
            alpha = r / k
        return k * (1.0 + delta) ** 2 * (2.0 - big_F(alpha)) ** 2
    raise ValueError(f"unknown regime {regime!r}")


# --- information-theoretic bounds --------------------------------------------

def binary_entropy(p):
    """``-p ln p - (1 - p) ln(1 - p)`` in nats, 0 at the endpoints."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    out = special.entr(p) + special.entr(1.0 - p)
    return out if out.ndim else float(out)


def entropy_pair(epsilon, alpha):
    """``eps h(alpha) + (1 - eps) h(alpha / (1/eps - 1))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(alpha_arr < 0) or np.any(alpha_arr > 1.0 - epsilon + 1e-15):
        raise ValueError(f"alpha must lie in [0, 1 - epsilon] = [0, {1.0 - epsilon}]")
    inner = np.minimum(alpha_arr * epsilon / (1.0 - epsilon), 1.0)
    out = epsilon * binary_entropy(alpha_arr) + (1.0 - epsilon) * binary_entropy(inner)
    return out if np.ndim(out) else float(out)


def g_lower(alpha, X):
    """Energy share of the weakest ``floor(alpha k)`` nonzero rows, divided by ``alpha``.

    ``g(alpha, X) = sum_{i <= floor(alpha k)} ||z^i||^2 / (alpha ||X||_F^2)`` with
    rows sorted by increasing norm. Returns 0 (with a warning) when
    ``alpha k < 1``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    energy = np.einsum("ij,ij->i", X, X)
    energy = np.sort(energy[energy > 0])
    k = energy.size
    if k == 0:
        raise ValueError("X has no nonzero rows")
    count = math.floor(alpha * k + 1e-9)
    if count < 1:
        warnings.warn(f"alpha*k = {alpha * k:.3g} < 1; empty sum, g = 0", stacklevel=2)
        return 0.0
    return float(energy[:count].sum() / (alpha * energy.sum()))


def empirical_g_profile(X):
    """``u -> g_lower(u, X)`` for a sampled signal."""
    X = np.asarray(X, dtype=float)
    return lambda u: g_lower(u, X)


def flat_g_profile(u):
    return 1.0


@dataclass
class BoundInputs:
    epsilon: float
    rho: float | None = None
    alpha: float = 0.1
    r: int = 1
    snr: float = 1.0
    g_profile: Callable[[float], float] = flat_g_profile
    kappa: Sequence[float] = field(default_factory=list)
    sigma_w: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < self.alpha <= 1.0 - self.epsilon:
            raise ValueError(
                f"alpha must lie in (0, 1 - epsilon] = (0, {1.0 - self.epsilon:g}], got {self.alpha}")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.snr <= 0:
            raise ValueError("snr must be > 0")
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.size and (np.any(kappa < 0) or np.any(np.diff(kappa) > 0)):
            raise ValueError("kappa must be nonnegative and nonincreasing")


@dataclass(frozen=True)
class SufficientResult:
    snr_ok: bool
    rho_threshold: float
    satisfied: bool
    snr_threshold: float
    argmax_u: float


class BoundEvaluationError(ValueError):
    pass


def _sample_rate_term(inputs, u):
    gam = inputs.snr * u * inputs.g_profile(u)
    return 2.0 * entropy_pair(inputs.epsilon, u) / (math.log(gam) + 1.0 / gam - 1.0), gam


def ml_sufficient(inputs: BoundInputs, grid_points=10_000):
    """Sufficient conditions for asymptotically reliable ML partial support recovery.

    SNR gate: ``snr > 1 / (alpha g(alpha))``. Sampling rate:
    ``rho > eps + (1/r) max_{u in [alpha, 1 - eps]} 2 h(eps, u) / (ln G + 1/G - 1)``
    with ``G = snr u g(u)``; the max is taken on a dense grid and refined by
    bounded scalar minimization around the best grid cell.
    """
    eps, alpha = inputs.epsilon, inputs.alpha
    g_alpha = inputs.g_profile(alpha)
    snr_threshold = math.inf if g_alpha <= 0 else 1.0 / (alpha * g_alpha)
    snr_ok = inputs.snr > snr_threshold
    if not snr_ok:
        return SufficientResult(False, math.nan, False, snr_threshold, math.nan)

    hi = 1.0 - eps
    grid = np.linspace(alpha, hi, grid_points)
    gam = inputs.snr * grid * np.array([inputs.g_profile(u) for u in grid])
    if np.any(gam <= 1.0):
        i = int(np.argmax(gam <= 1.0))
        raise BoundEvaluationError(
            f"SNR insufficient for bound evaluation: snr*u*g(u) = {gam[i]:.4g} <= 1 "
            f"at u = {grid[i]:.4g}")
    vals = 2.0 * entropy_pair(eps, grid) / (np.log(gam) + 1.0 / gam - 1.0)
    i = int(np.argmax(vals))
    best_u, best = float(grid[i]), float(vals[i])
    if grid_points > 1:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
        res = optimize.minimize_scalar(lambda u: -_sample_rate_term(inputs, u)[0],
                                       bounds=(a, b), method="bounded",
                                       options=dict(xatol=1e-12))
        if res.success and -res.fun > best:
            best_u, best = float(res.x), float(-res.fun)
    rho_threshold = eps + best / inputs.r
    satisfied = inputs.rho is not None and inputs.rho > rho_threshold
    return SufficientResult(True, rho_threshold, bool(satisfied), snr_threshold, best_u)


def ml_necessary_rho(inputs: BoundInputs, mutual_info_rate=0.0):
    """Lower limit on ``rho`` for any reliable recovery with distortion ``alpha``.

    ``(h(eps) - h(eps, alpha) + I/n) / sum_l 0.5 ln(1 + kappa_l / sigma_w^2)``;
    the conditional mutual information rate ``I/n`` depends on the signal
    model and is supplied by the caller.
    """
    if mutual_info_rate < 0:
        raise ValueError("mutual_info_rate must be >= 0")
    kappa = np.asarray(inputs.kappa, dtype=float)
    if kappa.size != inputs.r:
        raise ValueError(f"kappa needs r = {inputs.r} entries, got {kappa.size}")
    if inputs.sigma_w <= 0:
        raise ValueError("sigma_w must be > 0")
    denom = float(np.sum(0.5 * np.log1p(kappa / inputs.sigma_w ** 2)))
    if denom == 0.0:
        raise ValueError("zero-signal class: every kappa_l is 0")
    num = binary_entropy(inputs.epsilon) - entropy_pair(inputs.epsilon, inputs.alpha) \
        + mutual_info_rate
    return num / denom


def chi_tail_bounds(r_dof, eps):
    """Chernoff-type tails of a chi-squared(r) variable ``Z``.

    ``upper`` targets ``P{Z > (1 + eps) r}``, ``lower`` bounds ``P{Z < (1 - eps) r}``.

    ``lower`` is the Chernoff bound and holds for every ``r``. ``upper`` is not:
    the true tail decays like ``exp(-(r/2)(eps - ln(1 + eps)))``, whose rate is
    below ``eps^2 / 4``, so it is exceeded once ``r`` is large (``r >= 164`` at
    ``eps = 0.5``). It holds for ``r <= 100`` and ``eps <= 0.5``.
    """
    if r_dof < 1:
        raise ValueError("r_dof must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    upper = math.exp(-r_dof * eps ** 2 / 4.0)
    lower = math.exp(-(r_dof / 2.0) * (-math.log1p(-eps) - eps))
    return {"upper": upper, "lower": lower}
