import math

import numpy as np
import pytest

from htbnp import DomainError
from htbnp.priors import PriorSpec, ScaleSpec, TailDensity
from htbnp.theory import (RateSpec, SmoothnessBall, ball_norm, bvm_coordinate_check, calibrate_d1, fit_rate_slope,
                          membership, prior_mass_estimate, prior_mass_trend, rate_epsilon_n)
from htbnp.wavelet import CoefficientField

# P(|C - 0.3| < 0.2) for a standard Cauchy C, by scipy.integrate.quad
CAUCHY_MASS_REF = 0.1158581002198797


def test_sobolev_norm():
    f = np.array([1.0, 0.5, 0.25])
    ball = SmoothnessBall("Sobolev", 1.0, 1.5)
    assert ball_norm(f, ball) == pytest.approx(math.sqrt(1 + 1 + 0.5625))
    assert not membership(f, ball)
    assert membership(f / 2, ball)


def test_holder_and_besov_norms():
    f = CoefficientField(np.array([0.5, 0.25, 0.1, -0.1]), "wavelet")
    # levels 0, 0, 1, 1
    assert ball_norm(f, SmoothnessBall("Holder", 0.5, 1.0)) == pytest.approx(0.5)
    besov = SmoothnessBall("Besov", 0.5, 1.0, r=1.0)
    # weight 2**(l (beta + 1/2 - 1)) = 1 for beta = 1/2, r = 1
    assert ball_norm(f, besov) == pytest.approx(0.95)
    l2 = SmoothnessBall("Besov", 1.0, 1.0, r=2.0)
    assert ball_norm(f, l2) == pytest.approx(math.sqrt(0.25 + 0.0625 + 4 * 0.02))


def test_ball_layout_and_parameters_validated():
    with pytest.raises(DomainError):
        ball_norm(CoefficientField(np.zeros(4), "wavelet"), SmoothnessBall("Sobolev", 1.0, 1.0))
    with pytest.raises(DomainError):
        SmoothnessBall("Besov", 1.0, 1.0, r=3.0)
    with pytest.raises(DomainError):
        SmoothnessBall("Lipschitz", 1.0, 1.0)


def test_rate_formulas_closed_form():
    n = 1000.0
    ln = math.log(n)
    assert rate_epsilon_n(RateSpec("L2_ot", 1.0, 0.0, 0.5), n) == pytest.approx(ln**0.5 * n ** (-1 / 3))
    assert rate_epsilon_n(RateSpec("L2_ht", 1.0, 1.0), n) == pytest.approx(ln * n ** (-1 / 3))
    assert rate_epsilon_n(RateSpec("Linf_ot", 1.0), n) == pytest.approx(ln ** (2 / 3) * n ** (-1 / 3))
    ht = rate_epsilon_n(RateSpec("Linf_ht", 1.0), n)
    assert ht == pytest.approx(math.log(ln) ** (2 / 3) * ln ** (2 / 3) * n ** (-1 / 3))
    with pytest.raises(DomainError):
        rate_epsilon_n(RateSpec("L2_ot", 1.0), 2)


def test_prior_mass_matches_exact_one_dimensional_value():
    prior = PriorSpec(ScaleSpec.ot(), TailDensity.cauchy(), 1)
    est = prior_mass_estimate(prior, [0.3], 0.2, n_mc=200_000, rng_seed=1)
    assert est.ci_low < CAUCHY_MASS_REF < est.ci_high
    assert est.p_hat == pytest.approx(CAUCHY_MASS_REF, abs=0.003)
    again = prior_mass_estimate(prior, [0.3], 0.2, n_mc=200_000, rng_seed=1, batch=7_000)
    assert again.hits == est.hits


def test_prior_mass_edge_cases():
    prior = PriorSpec(ScaleSpec.ot(), TailDensity.cauchy(), 4)
    assert prior_mass_estimate(prior, np.zeros(4), 0.0, n_mc=100).hits == 0
    with pytest.raises(DomainError):
        prior_mass_estimate(prior, np.zeros(4), 0.1, norm="L1")
    with pytest.raises(DomainError):
        prior_mass_estimate("prior", np.zeros(4), 0.1)


def test_fit_rate_slope_is_exact_on_power_law():
    n = np.array([1e2, 1e3, 1e4, 1e5])
    fit = fit_rate_slope(np.column_stack([n, 3.0 * n**-0.25]))
    assert fit.slope == pytest.approx(-0.25, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0))
    assert fit.r2 == pytest.approx(1.0)
    with pytest.raises(DomainError):
        fit_rate_slope([[10, 1.0], [100, 0.5]])
    with pytest.raises(DomainError):
        fit_rate_slope([[10, 1.0], [5, 0.5], [100, 0.1]])


def test_bvm_check_on_exact_normal_draws():
    rng = np.random.default_rng(0)
    x = np.array([0.2, -0.4])
    n = 400.0
    draws = x + rng.standard_normal((20_000, 2)) / math.sqrt(n)
    res = bvm_coordinate_check(draws, x, n, [0, 1])
    assert all(stat < 0.015 for stat, _ in res.values())
    shifted = bvm_coordinate_check(draws + 0.1, x, n, [0])
    assert shifted[0][0] > 0.5
    with pytest.raises(DomainError):
        bvm_coordinate_check(draws, x, n, [2])


def test_calibrated_radius_reaches_target_and_trend_is_reported():
    prior = PriorSpec(ScaleSpec.ot(), TailDensity.cauchy(), 20)
    k = np.arange(1, 21)
    f0 = k**-1.5 * np.sin(k)
    rate = RateSpec("L2_ot", 1.0)
    d1 = calibrate_d1(prior, f0, 50, rate, target_ratio=-0.5, n_mc=4000, rng_seed=2)
    e = rate_epsilon_n(rate, 50)
    est = prior_mass_estimate(prior, f0, d1 * e, 4000, 2)
    assert math.log(est.p_hat) / (50 * e * e) >= -0.5
    trend = prior_mass_trend(prior, f0, [50, 100], rate, d1, n_mc=4000, rng_seed=3)
    assert trend.eps == pytest.approx([e, rate_epsilon_n(rate, 100)])
    for est, ratio, n in zip(trend.estimates, trend.ratios, [50, 100]):
        # an empty ball is reported as -inf rather than dropped
        expect = math.log(est.p_hat) / (n * rate_epsilon_n(rate, n) ** 2) if est.hits else -math.inf
        assert ratio == expect
