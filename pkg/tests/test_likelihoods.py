import math

import numpy as np
import pytest
from scipy import stats

from htbnp import DomainError
from htbnp.likelihoods import (ClassificationData, ClassificationLikelihood, DensityData, DensityLikelihood,
                               closed_grid, gaussian_coordinate_renyi, kl_and_v, log_normalizer,
                               normalize_density, renyi_divergence, sample_classification, sample_density,
                               trapezoid_weights, white_noise_renyi)
from htbnp.wavelet import synthesize_function, CoefficientField

# scipy.integrate.quad, frozen: p_v proportional to exp(2x), p_w to exp(-x) on [0, 1]
KL_REF = 0.3494384212907198
V_REF = 0.6208612628258015


def _fd_relative_error(lik, c, h=1e-6):
    _, g = lik.value_and_grad(c)
    fd = np.empty(c.size)
    for j in range(c.size):
        e = np.zeros(c.size)
        e[j] = h
        fd[j] = (lik(c + e) - lik(c - e)) / (2 * h)
    return np.linalg.norm(g - fd) / np.linalg.norm(fd)


def test_trapezoid_weights_integrate_linear_exactly():
    t = np.linspace(0, 1, 17)
    w = trapezoid_weights(17)
    assert w.sum() == pytest.approx(1.0)
    assert w @ t == pytest.approx(0.5)


def test_log_normalizer_of_linear_function():
    t = np.linspace(0, 1, 4097)
    assert log_normalizer(t) == pytest.approx(math.log(math.e - 1), abs=1e-7)


def test_normalize_density_integrates_to_one():
    f = np.sin(2 * np.pi * np.linspace(0, 1, 1025)) * 3
    g = normalize_density(f)
    assert g @ trapezoid_weights(g.size) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        normalize_density([0.0, np.inf])


def test_density_loglik_at_zero_function_is_zero():
    lik = DensityLikelihood(np.random.default_rng(0).uniform(size=100))
    assert lik(np.zeros(64)) == pytest.approx(0.0, abs=1e-10)


def test_classification_loglik_at_zero_function():
    rng = np.random.default_rng(1)
    data = ClassificationData(rng.uniform(size=50), rng.integers(0, 2, 50))
    lik = ClassificationLikelihood(data, rho=0.5)
    assert lik(np.zeros(32)) == pytest.approx(-50 * 0.5 * math.log(2.0), rel=1e-12)


def test_density_loglik_matches_direct_sum():
    rng = np.random.default_rng(2)
    c = rng.standard_normal(16) * 0.3
    x = rng.uniform(size=40)
    lik = DensityLikelihood(x, rho=0.7)
    F = synthesize_function(CoefficientField(c, "wavelet"), "daubechies8")
    idx = np.rint(x * F.size).astype(int) % F.size  # nearest grid point
    direct = 0.7 * (F[idx].sum() - 40 * log_normalizer(closed_grid(F)))
    assert lik(c) == pytest.approx(direct, rel=1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    dens = DensityLikelihood(rng.beta(2, 3, size=200), rho=0.8)
    xs = rng.uniform(size=200)
    cls = ClassificationLikelihood(ClassificationData(xs, (xs > 0.4).astype(int)))
    for _ in range(3):
        c = rng.standard_normal(32) * 0.5
        assert _fd_relative_error(dens, c) < 1e-5
        assert _fd_relative_error(cls, c) < 1e-5


def test_renyi_gaussian_identity():
    f, f0 = np.array([0.3, -0.1]), np.array([0.0, 0.2])
    for rho in (0.2, 0.5, 0.9):
        num = gaussian_coordinate_renyi(f, f0, 50.0, rho)
        assert num == pytest.approx(white_noise_renyi(f, f0, 50.0, rho), rel=1e-6)


def test_renyi_of_identical_densities_is_zero():
    g = normalize_density(np.cos(np.linspace(0, 6, 513)))
    assert renyi_divergence(g, g, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_renyi_validation():
    g = np.ones(65)
    with pytest.raises(DomainError):
        renyi_divergence(2 * g, g, 0.5)
    with pytest.raises(DomainError):
        renyi_divergence(g, g, 1.0)


def test_kl_and_v_match_quadrature_reference():
    t = np.linspace(0, 1, 4097)
    K, V = kl_and_v(2 * t, -t)
    assert K == pytest.approx(KL_REF, rel=1e-6)
    assert V == pytest.approx(V_REF, rel=1e-6)
    K2, V2 = kl_and_v(2 * t, -t, grid=t)
    assert K2 == pytest.approx(KL_REF, rel=1e-6)
    assert kl_and_v(t, t + 5.0)[0] == pytest.approx(0.0, abs=1e-12)


def test_sample_density_follows_the_law():
    t = (np.arange(1024) + 0.5) / 1024
    x = sample_density(np.log(2 * t), 40_000, rng_seed=4)
    # density 2x: cdf x**2
    assert stats.kstest(x, lambda u: np.clip(u, 0, 1) ** 2).statistic < 0.01
    np.testing.assert_array_equal(x, sample_density(np.log(2 * t), 40_000, rng_seed=4))


def test_sample_classification_follows_the_link():
    F = np.where(np.arange(4096) < 2048, -2.0, 1.0)
    d = sample_classification(F, 40_000, rng_seed=5)
    left = d.x < 0.5
    assert d.y[left].mean() == pytest.approx(1 / (1 + math.exp(2.0)), abs=0.01)
    assert d.y[~left].mean() == pytest.approx(1 / (1 + math.exp(-1.0)), abs=0.01)


def test_data_validation():
    with pytest.raises(DomainError):
        DensityData([0.2, 1.4])
    with pytest.raises(DomainError):
        ClassificationData([0.1, 0.2], [0, 2])
    with pytest.raises(DomainError):
        ClassificationData([0.1], [0, 1])
    with pytest.raises(DomainError):
        DensityLikelihood([0.5], rho=0.0)
