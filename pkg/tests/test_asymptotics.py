import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from jsrec import asymptotics as asy
from jsrec.verify import matched_mass_moments


# --- independent oracles ----------------------------------------------------------

def mp_weighted_integral(gamma, upper, power):
    """int_lo^upper x^power dlambda_gamma by algebraic-weight quadrature in x.

    The endpoint behaviour is carried by QUADPACK's ``(x - lo)^a (hi - x)^b``
    weight rather than by a change of variables.
    """
    lo, hi = (1 - gamma) ** 2, (1 + gamma) ** 2
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    full = upper >= hi
    b = 0.5 if full else 0.0
    if gamma == 1.0:
        # sqrt((4 - x) x) / x = x^(-1/2) (4 - x)^(1/2)
        a, f = -0.5, lambda x: x ** power / (2 * math.pi)
    else:
        a, f = 0.5, lambda x: x ** (power - 1) / (2 * math.pi * gamma ** 2)
    g = f if full else (lambda x: f(x) * math.sqrt(hi - x))
    return integrate.quad(g, lo, min(upper, hi), weight="alg", wvar=(a, b), **opts)[0]


def gamma1_table(points=10**6):
    """Trapezoid CDF and first moment of dlambda_1 on a uniform grid in u = sqrt(x)."""
    u = np.linspace(0.0, 2.0, points)
    dens = np.sqrt(np.clip(4.0 - u * u, 0.0, None)) / math.pi
    du = u[1] - u[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * du)])
    return u, cdf


# --- Marchenko-Pastur ---------------------------------------------------------------

@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.9, 1.0])
def test_density_normalized(gamma):
    assert mp_weighted_integral(gamma, 10.0, 0) == pytest.approx(1.0, abs=1e-8)
    mp = asy.MpMeasure(gamma)
    assert mp.moment(mp.support_hi, 0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("gamma", [0.2, 0.5, 1.0])
def test_mean_is_one(gamma):
    # trace identity E ||A_S||_F^2 / k = 1
    mp = asy.MpMeasure(gamma)
    assert mp.moment(mp.support_hi, 1) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("gamma,upper", [(0.3, 0.8), (0.5, 1.3), (0.7, 2.0), (1.0, 0.5)])
def test_cdf_against_weighted_quadrature(gamma, upper):
    assert asy.MpMeasure(gamma).cdf(upper) == pytest.approx(
        mp_weighted_integral(gamma, upper, 0), abs=1e-10)


def test_density_outside_support():
    assert asy.mp_density(0.1, 0.5) == 0.0
    assert asy.mp_density(2.3, 0.5) == 0.0
    assert asy.mp_density(1.0, 0.5) > 0.0
    np.testing.assert_array_equal(asy.mp_density(np.array([-1.0, 5.0]), 1.0), [0.0, 0.0])


def test_density_gamma_one_closed_form():
    x = np.linspace(0.05, 3.95, 40)
    np.testing.assert_allclose(asy.mp_density(x, 1.0), np.sqrt((4 - x) * x) / (2 * math.pi * x),
                               rtol=1e-14)


@pytest.mark.parametrize("gamma", [0.2, 0.6, 0.9])
def test_shifted_law_normalized(gamma):
    assert asy.mp_shifted_moment(4.0, gamma) == pytest.approx(1.0, abs=1e-10)
    s = np.linspace(0.0, 4.0, 200001)
    assert integrate.trapezoid(asy.mp_shifted_density(s, gamma), s) == pytest.approx(1.0, abs=1e-5)


def test_shifted_law_is_change_of_variables():
    gamma, s = 0.4, 1.7
    x = (1 - gamma) ** 2 + gamma * s
    assert asy.mp_shifted_moment(s, gamma) == pytest.approx(asy.MpMeasure(gamma).cdf(x), abs=1e-10)


def test_quantile_inverts_cdf():
    mp = asy.MpMeasure(0.5)
    for a in (0.01, 0.3, 0.77, 0.999):
        assert mp.cdf(mp.quantile(a)) == pytest.approx(a, abs=1e-11)


def test_matched_mass_moment_order():
    ok, lines = matched_mass_moments(grid=101)
    assert ok, lines


@pytest.mark.parametrize("gamma", [0.3, 0.6, 0.9])
def test_cdf_ordering(gamma):
    t = np.linspace(0.0, 4.0, 201)
    cdf1 = np.array([asy.MpMeasure(1.0).cdf(v) for v in t])
    cdf0 = np.array([asy.mp_shifted_moment(v, gamma) for v in t])
    assert np.all(cdf1 >= cdf0 - 1e-12)


# --- t1 and F ------------------------------------------------------------------------

def test_t1_endpoints():
    assert asy.t1_of_alpha(1.0) == 1.0
    assert asy.t1_of_alpha(0.0) == 0.0
    assert asy.t1_of_alpha(1e-8) < 1e-3


def test_t1_against_table():
    u, cdf = gamma1_table()
    oracle = np.interp(0.5, cdf, u) / 2.0
    assert asy.t1_of_alpha(0.5) == pytest.approx(oracle, abs=1e-6)


def test_t1_against_root_finding():
    root = optimize.brentq(lambda t: mp_weighted_integral(1.0, 4 * t * t, 0) - 0.3, 1e-6, 1.0,
                           xtol=1e-14)
    assert asy.t1_of_alpha(0.3) == pytest.approx(root, abs=1e-10)


def test_big_f_values():
    assert asy.big_F(1.0) == pytest.approx(1.0, abs=1e-8)
    assert asy.big_F(1e-4) < 1e-2
    upper = 4 * asy.t1_of_alpha(0.5) ** 2
    assert asy.big_F(0.5) == pytest.approx(mp_weighted_integral(1.0, upper, 1) / 0.5, abs=1e-9)


def test_big_f_monotone():
    vals = np.array([asy.big_F(a) for a in np.linspace(1e-3, 1.0, 200)])
    assert np.all(np.diff(vals) > 0)
    assert np.all((vals > 0) & (vals <= 1 + 1e-12))


def test_big_f_domain():
    with pytest.raises(ValueError):
        asy.big_F(0.0)
    with pytest.raises(ValueError):
        asy.t1_of_alpha(1.5)


def test_lower_singular_sum():
    assert asy.lower_singular_sum_limit(1.0, 0.5) == pytest.approx(1.0, abs=1e-10)
    for a in (0.2, 0.5, 0.8):
        for g in (0.3, 0.5, 0.9):
            assert asy.lower_singular_sum_bound(a, g) <= asy.lower_singular_sum_limit(a, g) + 1e-12


def test_t_gamma_matches_t1_at_gamma_one():
    assert asy.t_gamma_of_alpha(0.4, 1.0) == pytest.approx(asy.t1_of_alpha(0.4), abs=1e-12)


# --- sample-count bound -------------------------------------------------------------------

def test_somp_bound_fixed_r():
    assert asy.somp_sample_bound(10, 100, 1, 0.0) == pytest.approx(20 * math.log(90), rel=1e-14)
    assert round(asy.somp_sample_bound(10, 100, 1, 0.0), 3) == 89.996


def test_somp_bound_proportional_endpoints():
    assert asy.somp_sample_bound(10, 100, regime="proportional_r", alpha=1.0) == 10.0
    low = asy.somp_sample_bound(10, 100, regime="proportional_r", alpha=1e-4)
    assert abs(low - 40) <= 0.4


def test_somp_bound_decreasing_in_r():
    vals = [asy.somp_sample_bound(20, 200, r, regime="proportional_r") for r in range(1, 21)]
    assert np.all(np.diff(vals) < 0)


@pytest.mark.parametrize("kwargs", [
    dict(k=10, n=10, r=1), dict(k=5, n=50, r=0), dict(k=5, n=50, r=1, delta=-0.1),
    dict(k=5, n=50, r=1, regime="other"), dict(k=5, n=50, regime="proportional_r"),
])
def test_somp_bound_errors(kwargs):
    with pytest.raises(ValueError):
        asy.somp_sample_bound(**kwargs)


# --- entropies ----------------------------------------------------------------------------

def test_binary_entropy_values():
    assert asy.binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert asy.binary_entropy(0.0) == 0.0 and asy.binary_entropy(1.0) == 0.0
    p = 0.2
    assert asy.binary_entropy(p) == pytest.approx(-p * math.log(p) - (1 - p) * math.log(1 - p))


@given(st.floats(0.0, 1.0))
def test_binary_entropy_symmetric(p):
    assert asy.binary_entropy(p) == pytest.approx(asy.binary_entropy(1 - p), abs=1e-15)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.3])
def test_entropy_pair_identities(eps):
    assert abs(asy.entropy_pair(eps, 1 - eps) - asy.binary_entropy(eps)) <= 1e-12
    assert asy.entropy_pair(eps, 0.0) == 0.0


def test_entropy_pair_domain():
    with pytest.raises(ValueError):
        asy.entropy_pair(0.2, 0.81)
    with pytest.raises(ValueError):
        asy.entropy_pair(0.0, 0.1)


@settings(max_examples=30)
@given(st.floats(0.02, 0.6))
def test_entropy_pair_concave_with_stationary_max(eps):
    # d/du h(eps, u) = eps [h'(u) + h'(u eps / (1 - eps))] vanishes at u = 1 - eps,
    # so the maximum h(eps) sits at the right end of the domain with zero slope
    u = np.linspace(0.0, 1 - eps, 2001)
    v = asy.entropy_pair(eps, u)
    assert np.all(np.diff(v, 2) <= 1e-12)
    assert np.all(v <= asy.binary_entropy(eps) + 1e-12)
    du = 1e-6
    slope = (v[-1] - asy.entropy_pair(eps, 1 - eps - du)) / du
    assert abs(slope) < 1e-4


def test_g_lower_examples():
    X = np.zeros((10, 1))
    X[[1, 4, 6, 8], 0] = np.sqrt([1.0, 2.0, 3.0, 4.0])
    assert asy.g_lower(0.5, X) == pytest.approx(0.6, abs=1e-14)
    assert asy.g_lower(1.0, X) == pytest.approx(1.0, abs=1e-14)
    flat = np.ones((6, 3))
    assert asy.g_lower(0.5, flat) == pytest.approx(1.0, abs=1e-14)


def test_g_lower_empty_sum_warns():
    with pytest.warns(UserWarning, match="empty sum"):
        assert asy.g_lower(0.1, np.ones((4, 2))) == 0.0


# --- ML bounds --------------------------------------------------------------------------------

def brute_inner_max(eps, alpha, snr, points=10**6):
    u = np.linspace(alpha, 1 - eps, points)
    G = snr * u
    return float(np.max(2 * asy.entropy_pair(eps, u) / (np.log(G) + 1 / G - 1)))


def test_ml_sufficient_against_brute_grid():
    res = asy.ml_sufficient(asy.BoundInputs(epsilon=0.1, alpha=0.2, r=4, snr=10.0))
    assert res.snr_ok
    inner = (res.rho_threshold - 0.1) * 4
    assert inner == pytest.approx(brute_inner_max(0.1, 0.2, 10.0), abs=1e-6)


def test_ml_sufficient_large_r_limit():
    res = asy.ml_sufficient(asy.BoundInputs(epsilon=0.1, alpha=0.2, r=10**6, snr=10.0))
    assert abs(res.rho_threshold - 0.1) < 1e-4


def test_ml_sufficient_snr_gate():
    inputs = asy.BoundInputs(epsilon=0.1, rho=0.9, alpha=0.2, r=4, snr=4.9)
    res = asy.ml_sufficient(inputs)
    assert res.snr_threshold == pytest.approx(5.0)
    assert not res.snr_ok and not res.satisfied


def test_ml_sufficient_satisfied_flag():
    lo = asy.ml_sufficient(asy.BoundInputs(epsilon=0.1, rho=0.3, alpha=0.2, r=4, snr=10.0))
    hi = asy.ml_sufficient(asy.BoundInputs(epsilon=0.1, rho=0.6, alpha=0.2, r=4, snr=10.0))
    assert not lo.satisfied and hi.satisfied


def test_ml_sufficient_monotone():
    rho = [asy.ml_sufficient(asy.BoundInputs(0.1, alpha=0.2, r=4, snr=s)).rho_threshold
           for s in np.geomspace(6, 1e4, 25)]
    assert np.all(np.diff(rho) <= 1e-12)
    rho = [asy.ml_sufficient(asy.BoundInputs(0.1, alpha=0.2, r=r, snr=10.0)).rho_threshold
           for r in range(1, 30)]
    assert np.all(np.diff(rho) <= 1e-12)


def test_ml_sufficient_denominator_failure():
    profile = lambda u: 1.0 if u < 0.3 else 0.01
    with pytest.raises(asy.BoundEvaluationError, match="SNR insufficient"):
        asy.ml_sufficient(asy.BoundInputs(0.1, alpha=0.2, r=4, snr=10.0, g_profile=profile))


def test_ml_necessary_hand_value():
    inputs = asy.BoundInputs(epsilon=0.1, alpha=0.05, r=2, kappa=[4.0, 1.0], sigma_w=1.0)

    def h(p):
        return -p * math.log(p) - (1 - p) * math.log(1 - p)

    num = h(0.1) - (0.1 * h(0.05) + 0.9 * h(0.05 / 9))
    den = 0.5 * math.log(5) + 0.5 * math.log(2)
    assert asy.ml_necessary_rho(inputs, 0.0) == pytest.approx(num / den, abs=1e-10)


def test_ml_necessary_full_distortion():
    inputs = asy.BoundInputs(epsilon=0.2, alpha=0.8, r=1, kappa=[3.0])
    assert asy.ml_necessary_rho(inputs, 0.05) == pytest.approx(0.05 / (0.5 * math.log(4)),
                                                               abs=1e-12)


def test_ml_necessary_decreasing_in_kappa():
    a = asy.ml_necessary_rho(asy.BoundInputs(0.1, alpha=0.05, r=2, kappa=[4.0, 1.0]))
    b = asy.ml_necessary_rho(asy.BoundInputs(0.1, alpha=0.05, r=2, kappa=[8.0, 2.0]))
    assert b < a


def test_ml_necessary_zero_signal():
    with pytest.raises(ValueError, match="zero-signal"):
        asy.ml_necessary_rho(asy.BoundInputs(0.1, alpha=0.05, r=2, kappa=[0.0, 0.0]))


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.0), dict(epsilon=0.2, alpha=0.9), dict(epsilon=0.2, rho=1.0),
    dict(epsilon=0.2, r=0), dict(epsilon=0.2, snr=0.0), dict(epsilon=0.2, kappa=[1.0, 2.0]),
])
def test_bound_inputs_validation(kwargs):
    with pytest.raises(ValueError):
        asy.BoundInputs(**kwargs)


# --- chi-squared tails ------------------------------------------------------------------------

def test_chi_tail_values():
    b = asy.chi_tail_bounds(100, 0.5)
    assert b["upper"] == pytest.approx(math.exp(-6.25), rel=1e-14)
    assert b["lower"] == pytest.approx(math.exp(-50 * (-math.log(0.5) - 0.5)), rel=1e-14)


def test_chi_tail_vacuous_limit():
    b = asy.chi_tail_bounds(10, 1e-9)
    assert b["upper"] == pytest.approx(1.0) and b["lower"] == pytest.approx(1.0)


def test_chi_tail_domain():
    with pytest.raises(ValueError):
        asy.chi_tail_bounds(10, 1.0)
    with pytest.raises(ValueError):
        asy.chi_tail_bounds(0, 0.5)


@given(st.integers(1, 500), st.floats(0.01, 0.99))
def test_chi_lower_tail_dominates_exact(r, eps):
    assert stats.chi2.cdf((1 - eps) * r, r) <= asy.chi_tail_bounds(r, eps)["lower"] * (1 + 1e-12)


@given(st.integers(1, 100), st.floats(0.01, 0.5))
def test_chi_upper_tail_dominates_exact_moderate_r(r, eps):
    assert stats.chi2.sf((1 + eps) * r, r) <= asy.chi_tail_bounds(r, eps)["upper"] * (1 + 1e-12)


def test_chi_upper_tail_fails_for_large_r():
    # the exact exponent (r/2)(eps - ln(1 + eps)) is smaller than r eps^2 / 4
    assert stats.chi2.sf(1.5 * 1000, 1000) > asy.chi_tail_bounds(1000, 0.5)["upper"]


def test_no_warnings_in_normal_use():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        asy.big_F(0.3)
        asy.ml_sufficient(asy.BoundInputs(0.1, alpha=0.2, r=4, snr=10.0))
