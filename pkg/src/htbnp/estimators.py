"""scikit-learn style front ends for the posterior computations.

* :class:`SequencePosteriorMean` - coordinatewise posterior of a direct or
  inverse Gaussian sequence model; ``transform`` maps observed sequences to
  posterior means.
* :class:`WaveletDenoiser` - wavelet-domain posterior of a regularly
  sampled noisy signal (Donoho-Johnstone setting).
* :class:`SeriesDensityEstimator` - log-density prior ``f`` in a wavelet
  basis sampled by (whitened) pCN.
* :class:`SeriesClassifier` - logistic regression function with the same
  priors.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DomainError
from .likelihoods import (DENSITY_WAVELET, ClassificationLikelihood, DensityLikelihood, closed_grid,
                          logistic_link, normalize_density)
from .posterior import sequence_posterior
from .priors import PriorSpec, ScaleSpec, TailDensity
from .samplers import FieldMap, SamplerConfig, gaussian_loglik, mwg_hierarchical_gaussian, run_field_sampler
from .sequence_models import SequenceObservation
from .wavelet import FINE_LEVEL, CoefficientField, dwt_forward, dwt_inverse, dyadic_levels, grid_indices, synthesize_function


def make_tail(name, nu=None):
    if name == "StudentT":
        return TailDensity.student(3.0 if nu is None else nu)
    if name in ("Cauchy", "Gaussian", "Laplace"):
        return TailDensity(name)
    raise DomainError(f"unknown tail {name!r}")


def make_prior(kind="OT", tail="Cauchy", truncation=200, layout="single", a=1.0, delta=0.5,
               alpha=1.0, nu=None, coarse_level=0):
    """Build a :class:`PriorSpec` from flat parameters.

    ``kind`` is ``OT``, ``HT`` or ``Gaussian`` (polynomial scales with a
    Gaussian tail, ``tail`` ignored).
    """
    if kind == "OT":
        scale = ScaleSpec.ot(a, delta, layout)
    elif kind == "HT":
        scale = ScaleSpec.ht(alpha, layout)
    elif kind == "Gaussian":
        scale = ScaleSpec.gaussian(alpha, layout)
        tail = "Gaussian"
    else:
        raise DomainError(f"unknown prior kind {kind!r}")
    return PriorSpec(scale, make_tail(tail, nu), int(truncation), coarse_level)


class SequencePosteriorMean(TransformerMixin, BaseEstimator):
    """Coordinatewise posterior mean in ``X_k = kappa_k f_k + eps_k / sqrt(n)``.

    Each row of ``X`` is one observed sequence.  ``forward`` holds the
    multipliers ``kappa_k`` (``None`` for the direct model).  ``method`` is
    ``quadrature`` (default, exact to ``rtol``) or ``mcmc``.
    """

    def __init__(self, prior_kind="OT", tail="Cauchy", truncation=200, a=1.0, delta=0.5, alpha=1.0,
                 nu=None, noise_precision=1.0, rho=1.0, forward=None, method="quadrature", rtol=1e-9):
        self.prior_kind = prior_kind
        self.tail = tail
        self.truncation = truncation
        self.a = a
        self.delta = delta
        self.alpha = alpha
        self.nu = nu
        self.noise_precision = noise_precision
        self.rho = rho
        self.forward = forward
        self.method = method
        self.rtol = rtol

    def fit(self, X, y=None):
        X = check_array(X)
        self.prior_ = make_prior(self.prior_kind, self.tail, self.truncation, "single",
                                 self.a, self.delta, self.alpha, self.nu)
        if self.forward is not None and np.asarray(self.forward).size != X.shape[1]:
            raise DomainError("forward multipliers must match the number of coordinates")
        self.n_features_in_ = X.shape[1]
        return self

    def posterior(self, X):
        check_is_fitted(self, "prior_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} coordinates, got {X.shape[1]}")
        out = []
        for row in X:
            obs = SequenceObservation(row, self.noise_precision, self.forward)
            out.append(sequence_posterior(obs, self.prior_, self.rho, self.method, rtol=self.rtol))
        return out

    def transform(self, X):
        return np.vstack([p.mean for p in self.posterior(X)])


class WaveletDenoiser(TransformerMixin, BaseEstimator):
    """Posterior-mean denoising of signals sampled at ``2**J`` points.

    The noise is white with standard deviation ``noise_sd`` in the sample
    domain, which the orthonormal DWT carries to i.i.d. coefficient noise.
    ``method`` selects the posterior computation:

    ``quadrature``
        exact coordinatewise posterior mean of the series prior;
    ``mala``
        warm-started whitened MALA (diagonal Gauss-Newton preconditioning);
    ``mwg``
        hierarchical Gaussian prior ``s_l = 2**(-l (1/2 + alpha))`` with
        ``alpha ~ Exp(1)``, ``tau ~ InvGamma(1, 1)``.

    Wavelet levels at or below ``coarse_level`` share the level-0 scale.
    """

    def __init__(self, prior_kind="OT", tail="Cauchy", a=1.0, delta=0.5, alpha=1.0, wavelet="symmlet8",
                 coarse_level=5, noise_sd=1.0, method="quadrature", n_draws=20000, burn_in=10000,
                 thin=10, step=0.1, random_state=0):
        self.prior_kind = prior_kind
        self.tail = tail
        self.a = a
        self.delta = delta
        self.alpha = alpha
        self.wavelet = wavelet
        self.coarse_level = coarse_level
        self.noise_sd = noise_sd
        self.method = method
        self.n_draws = n_draws
        self.burn_in = burn_in
        self.thin = thin
        self.step = step
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        J = int(math.log2(X.shape[1]))
        if 1 << J != X.shape[1]:
            raise DomainError("signals must have a power-of-two length")
        if self.method not in ("quadrature", "mala", "mwg"):
            raise DomainError(f"unknown method {self.method!r}")
        self.prior_ = make_prior(self.prior_kind, self.tail, J - 1, "wavelet", self.a, self.delta,
                                 self.alpha, coarse_level=self.coarse_level)
        self.n_features_in_ = X.shape[1]
        return self

    def coefficients(self, X):
        """Posterior-mean wavelet coefficients (rows), plus chain outputs for MCMC methods."""
        check_is_fitted(self, "prior_")
        X = check_array(X)
        n = 1.0 / self.noise_sd**2
        means, chains = [], []
        for i, row in enumerate(X):
            x = dwt_forward(row, self.wavelet, self.coarse_level).values
            seed = self.random_state + i
            if self.method == "quadrature":
                obs = SequenceObservation(x, n, None, "wavelet", self.coarse_level)
                means.append(sequence_posterior(obs, self.prior_, 1.0).mean)
                continue
            cfg_kw = dict(n_draws=self.n_draws, burn_in=self.burn_in, thin=self.thin, seed=seed)
            if self.method == "mala":
                fmap = FieldMap(self.prior_.scales(), self.prior_.tail)
                cfg = SamplerConfig("WhitenedMALA", init="data", step=self.step, **cfg_kw)
                chain = run_field_sampler(fmap, gaussian_loglik(x, n), cfg, init_xi=fmap.xi_of(x),
                                          fisher=np.full(x.size, n))
            else:
                lev = np.maximum(dyadic_levels(x.size) - self.coarse_level, 0)
                cfg = SamplerConfig("MwGGaussian", **cfg_kw)
                chain = mwg_hierarchical_gaussian(x, n, lev, "wavelet", config=cfg)
            means.append(chain.traces["running_mean"])
            chains.append(chain)
        self.chains_ = chains
        return np.vstack(means)

    def transform(self, X):
        coefs = self.coefficients(X)
        return np.vstack([dwt_inverse(CoefficientField(c, "wavelet", self.coarse_level), self.wavelet)
                          for c in coefs])


def _function_prior(prior_kind, tail, max_level, a, delta, alpha, nu):
    return make_prior(prior_kind, tail, max_level, "wavelet", a, delta, alpha, nu)


class _FunctionPosterior(BaseEstimator):
    """Shared machinery: prior-draw initialized (whitened) pCN on wavelet coefficients."""

    def _sample(self, lik):
        self.prior_ = _function_prior(self.prior_kind, self.tail, self.max_level, self.a, self.delta,
                                      self.alpha, self.nu)
        fmap = FieldMap(self.prior_.scales(), self.prior_.tail)
        algo = "PCN" if self.prior_.tail.kind == "Gaussian" else "WhitenedPCN"
        cfg = SamplerConfig(algo, n_draws=self.n_draws, burn_in=self.burn_in, thin=self.thin,
                            seed=self.random_state, beta=self.beta)
        self.chain_ = run_field_sampler(fmap, lik, cfg)
        self.grid_values_ = synthesize_function(
            CoefficientField(self.chain_.draws, "wavelet", 0), self.wavelet, FINE_LEVEL)
        return self


class SeriesDensityEstimator(_FunctionPosterior):
    """Posterior for ``g = exp(f) / int exp(f)`` with a wavelet series prior on ``f``.

    ``fit`` takes samples in [0, 1] (shape ``(n,)`` or ``(n, 1)``);
    ``predict`` returns the posterior mean density at new points and
    ``density_draws_`` holds the normalized density of every kept draw on
    the closed fine grid.
    """

    def __init__(self, prior_kind="OT", tail="Cauchy", max_level=10, a=1.0, delta=1.0, alpha=5.0, nu=None,
                 rho=1.0, wavelet=DENSITY_WAVELET, n_draws=5000, burn_in=2500, thin=5, beta=0.1,
                 random_state=0):
        self.prior_kind = prior_kind
        self.tail = tail
        self.max_level = max_level
        self.a = a
        self.delta = delta
        self.alpha = alpha
        self.nu = nu
        self.rho = rho
        self.wavelet = wavelet
        self.n_draws = n_draws
        self.burn_in = burn_in
        self.thin = thin
        self.beta = beta
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(np.asarray(X, dtype=float).reshape(-1, 1))
        self.n_features_in_ = 1
        self._sample(DensityLikelihood(X[:, 0], self.rho, self.wavelet))
        self.density_draws_ = normalize_density(closed_grid(self.grid_values_))
        self.mean_density_ = self.density_draws_.mean(axis=0)
        return self

    def predict(self, X):
        check_is_fitted(self, "mean_density_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1))[:, 0]
        return self.mean_density_[:-1][grid_indices(x)]

    def score_samples(self, X):
        return np.log(self.predict(X))


class SeriesClassifier(ClassifierMixin, _FunctionPosterior):
    """Posterior for ``P(Y = 1 | x) = logistic(f(x))`` with a wavelet series prior on ``f``."""

    def __init__(self, prior_kind="OT", tail="Cauchy", max_level=10, a=1.0, delta=1.0, alpha=5.0, nu=None,
                 rho=1.0, wavelet=DENSITY_WAVELET, n_draws=5000, burn_in=2500, thin=5, beta=0.1,
                 random_state=0):
        self.prior_kind = prior_kind
        self.tail = tail
        self.max_level = max_level
        self.a = a
        self.delta = delta
        self.alpha = alpha
        self.nu = nu
        self.rho = rho
        self.wavelet = wavelet
        self.n_draws = n_draws
        self.burn_in = burn_in
        self.thin = thin
        self.beta = beta
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float).reshape(-1, 1), y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 1
        self._sample(ClassificationLikelihood((X[:, 0], y), self.rho, self.wavelet))
        self.prob_draws_ = logistic_link(self.grid_values_)
        self.mean_prob_ = self.prob_draws_.mean(axis=0)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "mean_prob_")
        x = check_array(np.asarray(X, dtype=float).reshape(-1, 1))[:, 0]
        p = self.mean_prob_[grid_indices(x)]
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)
