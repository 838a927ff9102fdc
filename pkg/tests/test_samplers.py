import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from htbnp import DomainError
from htbnp.priors import TailDensity
from htbnp.samplers import (XI_LIMIT, FieldMap, SamplerConfig, WhiteningMap, _mala_coefficients, credible_region,
                            gaussian_loglik, make_state, mwg_hierarchical_gaussian, pcn_step, run_field_sampler,
                            whiten_inverse, whiten_transform, whitened_mala_step)


def test_cauchy_whitening_formula():
    xi = np.array([-3.0, -0.4, 0.0, 0.7, 2.5])
    expect = np.tan(math.pi * (1 - 2 * stats.norm.cdf(xi)) / 2)
    np.testing.assert_allclose(whiten_transform(xi), expect, rtol=1e-12, atol=1e-15)
    assert whiten_transform(0.0) == 0.0


@pytest.mark.parametrize("tail", [TailDensity.cauchy(), TailDensity.student(3.0), TailDensity.laplace(),
                                  TailDensity.gaussian()])
def test_whitening_inverse_round_trip(tail):
    xi = np.linspace(-6, 6, 49)
    T = WhiteningMap(tail)
    np.testing.assert_allclose(T.inverse(T(xi)), xi, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(-8, 8).filter(lambda v: abs(v) > 1e-3))
def test_whitening_derivative_matches_finite_difference(xi):
    T = WhiteningMap(TailDensity.cauchy())
    h = 1e-6 * max(1.0, abs(xi))
    fd = (T(xi + h) - T(xi - h)) / (2 * h)
    assert T.derivative(xi) == pytest.approx(fd, rel=1e-5)


def test_whitening_extreme_inputs_stay_finite():
    z = whiten_transform(np.array([-1e3, 1e3]))
    assert np.all(np.isfinite(z)) and z[0] > 0 > z[1]
    xi = whiten_inverse(1e300)
    assert -XI_LIMIT <= xi < 0
    assert whiten_transform(xi) == pytest.approx(1e300, rel=1e-6)


def test_whitening_law_is_cauchy():
    xi = np.random.default_rng(0).standard_normal(50_000)
    assert stats.kstest(whiten_transform(xi), "cauchy").statistic < 0.01


def test_mala_coefficients_preserve_reference():
    for h in (1e-4, 0.1, 1.0, 7.0):
        a, b, c = _mala_coefficients(h)
        assert a * a + c * c == pytest.approx(1.0, rel=1e-12)
        assert b == pytest.approx(1 - a)


def test_pcn_accepts_everything_without_likelihood():
    fmap = FieldMap(np.ones(3), TailDensity.cauchy())
    rng = np.random.default_rng(0)
    state = make_state(fmap, lambda f: 0.0, np.zeros(3))
    for _ in range(20):
        state, ok, bad = pcn_step(state, lambda f: 0.0, 0.3, fmap, rng)
        assert ok and not bad
    with pytest.raises(DomainError):
        pcn_step(state, lambda f: 0.0, 1.5, fmap, rng)


def test_nonfinite_proposals_are_rejected_and_counted():
    fmap = FieldMap(np.ones(2), TailDensity.cauchy())
    rng = np.random.default_rng(1)
    ll = lambda f: -np.inf if f[0] > 0 else 0.0
    state = make_state(fmap, ll, np.array([1.0, 0.0]))  # T decreasing: f[0] < 0
    bad = 0
    for _ in range(50):
        state, _, b = pcn_step(state, ll, 1.0, fmap, rng)
        bad += b
    assert bad > 0 and np.isfinite(state.loglik)


def _conjugate_problem():
    # N(0, s^2) prior, x_k ~ N(f_k, 1/n)
    s = np.array([1.0, 0.5, 0.2, 0.1])
    x = np.array([0.8, -0.3, 0.1, 0.05])
    n = 20.0
    prec = n + 1 / s**2
    return s, x, n, n * x / prec, 1 / prec


@pytest.mark.parametrize("algo", ["PCN", "WhitenedMALA"])
def test_gaussian_conjugate_posterior_is_recovered(algo):
    s, x, n, mean, var = _conjugate_problem()
    fmap = FieldMap(s, TailDensity.gaussian())
    lg = gaussian_loglik(x, n)
    ll = lg if algo == "WhitenedMALA" else (lambda f: lg(f)[0])
    cfg = SamplerConfig(algo, n_draws=40_000, burn_in=5000, seed=4, step=0.5)
    chain = run_field_sampler(fmap, ll, cfg)
    se = chain.mcse()
    assert np.all(np.abs(chain.mean() - mean) < 5 * se + 1e-3)
    np.testing.assert_allclose(chain.draws.var(axis=0), var, rtol=0.1)


def test_mala_step_rejects_bad_step():
    fmap = FieldMap(np.ones(2), TailDensity.cauchy())
    state = make_state(fmap, gaussian_loglik(np.zeros(2), 1.0), np.zeros(2), with_grad=True)
    with pytest.raises(DomainError):
        whitened_mala_step(state, gaussian_loglik(np.zeros(2), 1.0), 0.0, fmap, np.random.default_rng(0))


def test_preconditioned_mala_on_cauchy_prior_matches_quadrature():
    from htbnp.posterior import CoordProblem, coord_summary_quadrature
    s = np.array([1.0, 0.3])
    x = np.array([2.0, 0.1])
    n = 9.0
    fmap = FieldMap(s, TailDensity.cauchy())
    cfg = SamplerConfig("WhitenedMALA", n_draws=40_000, burn_in=5000, seed=2, step=0.5)
    chain = run_field_sampler(fmap, gaussian_loglik(x, n), cfg, init_xi=fmap.xi_of(x), fisher=np.full(2, n))
    ref = [coord_summary_quadrature(CoordProblem(x[i], n, s[i], TailDensity.cauchy())).mean for i in range(2)]
    assert np.all(np.abs(chain.mean() - ref) < 5 * chain.mcse() + 2e-3)
    assert chain.config["preconditioned"]


def test_sampler_config_validation():
    with pytest.raises(DomainError):
        SamplerConfig("HMC")
    with pytest.raises(DomainError):
        SamplerConfig(n_draws=10, burn_in=10)
    with pytest.raises(DomainError):
        run_field_sampler(FieldMap(np.ones(2), TailDensity.cauchy()), lambda f: 0.0, SamplerConfig("PCN"))


def test_mwg_with_frozen_hyperparameters_is_conjugate():
    idx = np.arange(1, 6)
    x = np.array([0.5, -0.2, 0.1, 0.0, 0.02])
    n = 50.0
    alpha = 1.0
    cfg = SamplerConfig("MwGGaussian", n_draws=20_000, burn_in=1000, seed=0, alpha_proposal_sd=0.0, adapt=False)
    chain = mwg_hierarchical_gaussian(x, n, idx, "single", config=cfg, sample_tau=False, alpha=alpha)
    s2 = idx ** (-1.0 - 2 * alpha)
    mean = n * x / (n + 1 / s2)
    np.testing.assert_allclose(chain.traces["running_mean"], mean, atol=4 / math.sqrt(19_000) * 0.2)
    assert np.all(chain.traces["alpha"] == alpha)


def test_mwg_prior_only_recovers_hyperprior():
    cfg = SamplerConfig("MwGGaussian", n_draws=30_000, burn_in=2000, seed=1)
    chain = mwg_hierarchical_gaussian(None, 1.0, np.arange(1, 4), "single", config=cfg, sample_tau=False)
    # alpha ~ Exp(1) when the likelihood is off
    assert np.mean(chain.traces["alpha"]) == pytest.approx(1.0, abs=0.12)


def test_mwg_parametrizations_agree():
    x = np.random.default_rng(0).normal(0, 0.3, 32)
    lev = np.floor(np.log2(np.arange(32) + 1)).astype(int)
    means = []
    for par in ("centered", "noncentered"):
        cfg = SamplerConfig("MwGGaussian", n_draws=8000, burn_in=2000, seed=3, parametrization=par)
        means.append(mwg_hierarchical_gaussian(x, 100.0, lev, "wavelet", config=cfg).traces["running_mean"])
    np.testing.assert_allclose(means[0], means[1], atol=0.02)


def test_credible_region_keeps_closest_draws():
    d = np.array([[0.0], [1.0], [-1.0], [10.0], [0.5]])
    r = credible_region(d, 0.8, "L2")
    assert len(r.indices) == 4
    assert 3 not in r.indices
    assert list(r.indices) == sorted(r.indices)
    assert r.radius == pytest.approx(np.max(np.abs(d[r.indices, 0] - d.mean())))
    assert r.lower[0] == -1.0 and r.upper[0] == 1.0


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 60), level=st.floats(0.05, 1.0), norm=st.sampled_from(["L1", "L2", "Linf"]))
def test_credible_region_size_property(n, level, norm):
    d = np.random.default_rng(n).standard_normal((n, 3))
    r = credible_region(d, level, norm)
    assert len(r.indices) == math.ceil(level * n - 1e-9)
    assert np.all(r.lower <= r.upper)


def test_credible_region_validation():
    with pytest.raises(DomainError):
        credible_region(np.zeros((0, 2)))
    with pytest.raises(DomainError):
        credible_region(np.zeros((3, 2)), level=0.0)
    with pytest.raises(DomainError):
        credible_region(np.zeros((3, 2)), norm="L3")
