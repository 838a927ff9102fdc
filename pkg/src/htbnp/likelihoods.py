"""Log-likelihoods for density estimation and binary classification.

A function ``f`` on [0, 1] is represented by its wavelet coefficients and
evaluated on the fine grid ``i / 2**12`` (see
:func:`htbnp.wavelet.synthesize_function`).  Integrals over [0, 1] use the
trapezoid rule on the ``2**12 + 1`` grid points; for periodized bases the
endpoint values agree and the rule reduces to the grid mean.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from ._random import make_rng
from .exceptions import DomainError
from .wavelet import FINE_LEVEL, CoefficientField, analyze_function, grid_indices, synthesize_function

DENSITY_WAVELET = "daubechies8"


def _check_rho(rho):
    if not 0 < rho <= 1:
        raise DomainError("rho must lie in (0, 1]")


def _unit_interval(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size and (not np.all(np.isfinite(x)) or x.min() < 0 or x.max() > 1):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


@dataclass
class DensityData:
    samples: np.ndarray

    def __post_init__(self):
        self.samples = _unit_interval(self.samples, "density samples")

    @property
    def n(self):
        return self.samples.size


@dataclass
class ClassificationData:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = _unit_interval(self.x, "classification inputs")
        self.y = np.asarray(self.y).ravel()
        if self.y.shape != self.x.shape:
            raise DomainError("x and y must have the same length")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise DomainError("labels must be 0 or 1")
        self.y = self.y.astype(float)

    @property
    def n(self):
        return self.x.size


def trapezoid_weights(m):
    """Trapezoid weights for ``m`` equispaced points on [0, 1]."""
    w = np.full(m, 1.0 / (m - 1))
    w[[0, -1]] *= 0.5
    return w


def closed_grid(values):
    """Append the periodic endpoint so that ``2**J`` values cover [0, 1]."""
    v = np.asarray(values, dtype=float)
    return np.concatenate([v, v[..., :1]], axis=-1)


def log_normalizer(f_grid):
    """``log int_0^1 exp(f)`` by the trapezoid rule, in the log domain."""
    f = np.asarray(f_grid, dtype=float)
    w = trapezoid_weights(f.shape[-1])
    return special.logsumexp(f, axis=-1, b=w)


def normalize_density(f_grid):
    """``g = exp(f) / int exp(f)`` on an equispaced grid of [0, 1] including both ends."""
    f = np.asarray(f_grid, dtype=float)
    if not np.all(np.isfinite(f)):
        raise DomainError("log-density values must be finite")
    return np.exp(f - np.expand_dims(log_normalizer(f), -1))


def _values(f):
    return f.values if isinstance(f, CoefficientField) else np.asarray(f, dtype=float)


class DensityLikelihood:
    """``rho * (sum_i f(X_i) - n log int exp(f))`` as a function of coefficients.

    Sample points are binned once onto the fine grid; the gradient is the
    adjoint synthesis of ``rho * (counts - n * softmax(f_grid))``.
    """

    def __init__(self, data, rho=1.0, wavelet=DENSITY_WAVELET, fine_level=FINE_LEVEL, coarse_level=0):
        _check_rho(rho)
        self.data = data if isinstance(data, DensityData) else DensityData(data)
        self.rho = float(rho)
        self.wavelet = wavelet
        self.fine_level = fine_level
        self.coarse_level = coarse_level
        size = 1 << fine_level
        self.counts = np.bincount(grid_indices(self.data.samples, fine_level), minlength=size).astype(float)

    def grid_values(self, coefs):
        field = CoefficientField(_values(coefs), "wavelet", self.coarse_level)
        return synthesize_function(field, self.wavelet, self.fine_level)

    def __call__(self, coefs):
        F = self.grid_values(coefs)
        n = self.data.n
        return self.rho * (float(self.counts @ F) - n * float(log_normalizer(closed_grid(F))))

    def value_and_grad(self, coefs):
        c = _values(coefs)
        F = self.grid_values(c)
        n = self.data.n
        lz = float(log_normalizer(closed_grid(F)))
        ll = self.rho * (float(self.counts @ F) - n * lz)
        # periodic trapezoid = grid mean, so d log Z / d F_j = exp(F_j - lz) / N
        soft = np.exp(F - lz) / F.size
        resid = self.rho * (self.counts - n * soft)
        level = int(math.log2(c.size)) - 1
        grad = analyze_function(resid, self.wavelet, self.coarse_level, level).values
        return ll, grad


def density_loglik(f, data, rho=1.0, wavelet=DENSITY_WAVELET, with_grad=False):
    lik = DensityLikelihood(data, rho, wavelet)
    return lik.value_and_grad(f) if with_grad else lik(f)


def logistic_link(u):
    """``1 / (1 + exp(-u))``."""
    return special.expit(u)


class ClassificationLikelihood:
    """``rho * sum_i [Y_i f(X_i) - log(1 + exp f(X_i))]``; the marginal of X factors out.

    Inputs are binned onto the fine grid once, so each evaluation costs
    ``O(2**fine_level)`` whatever the sample size.
    """

    def __init__(self, data, rho=1.0, wavelet=DENSITY_WAVELET, fine_level=FINE_LEVEL, coarse_level=0):
        _check_rho(rho)
        self.data = data if isinstance(data, ClassificationData) else ClassificationData(*data)
        self.rho = float(rho)
        self.wavelet = wavelet
        self.fine_level = fine_level
        self.coarse_level = coarse_level
        idx = grid_indices(self.data.x, fine_level)
        size = 1 << fine_level
        self.counts = np.bincount(idx, minlength=size).astype(float)
        self.ones = np.bincount(idx, weights=self.data.y, minlength=size)

    def grid_values(self, coefs):
        field = CoefficientField(_values(coefs), "wavelet", self.coarse_level)
        return synthesize_function(field, self.wavelet, self.fine_level)

    def _value(self, F):
        return float(self.ones @ F - self.counts @ np.logaddexp(0.0, F))

    def __call__(self, coefs):
        return self.rho * self._value(self.grid_values(coefs))

    def value_and_grad(self, coefs):
        c = _values(coefs)
        F = self.grid_values(c)
        resid = self.rho * (self.ones - self.counts * logistic_link(F))
        level = int(math.log2(c.size)) - 1
        grad = analyze_function(resid, self.wavelet, self.coarse_level, level).values
        return self.rho * self._value(F), grad


def classification_loglik(f, data, rho=1.0, wavelet=DENSITY_WAVELET, with_grad=False):
    lik = ClassificationLikelihood(data, rho, wavelet)
    return lik.value_and_grad(f) if with_grad else lik(f)


def _trapezoid(values, grid):
    if grid is None:
        return values @ trapezoid_weights(values.size)
    return integrate.trapezoid(values, np.asarray(grid, dtype=float))


def _check_normalized(p, grid, tol, name):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} must be finite and nonnegative")
    mass = _trapezoid(p, grid)
    if abs(mass - 1.0) > tol:
        raise DomainError(f"{name} integrates to {mass:.9g}, not 1")
    return p


def renyi_divergence(p, q, rho, grid=None, tol=1e-6):
    """``-1/(1 - rho) log int p**rho q**(1 - rho)`` for densities on a common grid.

    ``grid`` defaults to the equispaced grid of [0, 1] matching the length
    of ``p``.  The integrand is formed in the log domain.
    """
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    p = _check_normalized(p, grid, tol, "p")
    q = _check_normalized(q, grid, tol, "q")
    if p.shape != q.shape:
        raise DomainError("p and q must share the grid")
    with np.errstate(divide="ignore"):
        integrand = np.exp(rho * np.log(p) + (1 - rho) * np.log(q))
    val = _trapezoid(integrand, grid)
    return max(-math.log(val) / (1 - rho), 0.0)


def white_noise_renyi(f, f0, n, rho):
    """Closed form ``n rho ||f - f0||**2 / 2`` in the Gaussian sequence model."""
    d = np.asarray(f, dtype=float) - np.asarray(f0, dtype=float)
    return 0.5 * n * rho * float(d @ d)


def gaussian_coordinate_renyi(f, f0, n, rho, points=4001, width=40.0):
    """Numerical Renyi divergence of ``prod N(f_k, 1/n)`` from ``prod N(f0_k, 1/n)``.

    Each coordinate is integrated by the trapezoid rule on a grid covering
    both means by ``width`` standard deviations; the divergence of a product
    is the sum over coordinates.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    f0 = np.atleast_1d(np.asarray(f0, dtype=float))
    sd = 1.0 / math.sqrt(n)
    total = 0.0
    for a, b in zip(f, f0):
        grid = np.linspace(min(a, b) - width * sd, max(a, b) + width * sd, points)
        p = np.exp(-0.5 * ((grid - a) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        q = np.exp(-0.5 * ((grid - b) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        total += renyi_divergence(p, q, rho, grid)
    return total


def kl_and_v(v, w, grid=None):
    """KL divergence ``K`` and second moment ``V`` of ``log(p_v / p_w)`` under ``p_v``.

    ``v`` and ``w`` are unnormalized log-densities on the equispaced grid of
    [0, 1] (or on ``grid``).
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if grid is None:
        lv, lw = log_normalizer(v), log_normalizer(w)
    else:
        lv = math.log(_trapezoid(np.exp(v - v.max()), grid)) + v.max()
        lw = math.log(_trapezoid(np.exp(w - w.max()), grid)) + w.max()
    log_ratio = (v - lv) - (w - lw)
    pv = np.exp(v - lv)
    K = _trapezoid(pv * log_ratio, grid)
    V = _trapezoid(pv * (log_ratio - K) ** 2, grid)
    return max(float(K), 0.0), float(V)


def sample_density(log_density_grid, n, rng_seed=0):
    """Draw ``n`` points from the density ``exp(f)/Z`` given on the periodic fine grid.

    Sampling picks a grid cell with probability proportional to ``exp(f)``
    and jitters uniformly within it.
    """
    F = np.asarray(log_density_grid, dtype=float)
    rng = make_rng(rng_seed)
    prob = np.exp(F - F.max())
    prob /= prob.sum()
    cells = rng.choice(F.size, size=int(n), p=prob)
    x = (cells + rng.uniform(-0.5, 0.5, size=int(n))) / F.size
    return np.mod(x, 1.0)


def sample_classification(f_grid, n, rng_seed=0):
    """Uniform inputs with ``P(Y = 1 | x) = logistic(f(x))``."""
    F = np.asarray(f_grid, dtype=float)
    rng = make_rng(rng_seed)
    x = rng.uniform(0.0, 1.0, size=int(n))
    idx = grid_indices(x, int(math.log2(F.size)))
    y = (rng.uniform(size=int(n)) < logistic_link(F[idx])).astype(int)
    return ClassificationData(x, y)
