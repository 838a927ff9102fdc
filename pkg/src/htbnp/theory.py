"""Finite-n checks of smoothness classes, rates, prior mass and coordinate normality."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from ._random import derive_rng, make_rng
from .exceptions import DomainError
from .priors import PriorSpec, tail_sample
from .wavelet import CoefficientField, dyadic_levels

BALL_KINDS = ("Sobolev", "Holder", "Besov")
RATE_FLAVORS = ("L2_ht", "L2_ot", "Linf_ht", "Linf_ot")


@dataclass(frozen=True)
class SmoothnessBall:
    """Sobolev (single layout), Hoelder or Besov (wavelet layout) ball of radius ``L``."""

    kind: str
    beta: float
    L: float
    r: float = 2.0

    def __post_init__(self):
        if self.kind not in BALL_KINDS:
            raise DomainError(f"unknown ball kind {self.kind!r}")
        if not (self.beta > 0 and self.L > 0):
            raise DomainError("beta and L must be positive")
        if self.kind == "Besov" and not 1 <= self.r <= 2:
            raise DomainError("Besov index r must lie in [1, 2]")


def _layout_values(f, ball):
    if isinstance(f, CoefficientField):
        layout, vals = f.layout, f.values
    else:
        vals = np.asarray(f, dtype=float)
        layout = "single" if ball.kind == "Sobolev" else "wavelet"
    need = "single" if ball.kind == "Sobolev" else "wavelet"
    if layout != need:
        raise DomainError(f"{ball.kind} norms need the {need} layout, got {layout!r}")
    return vals


def ball_norm(f, ball):
    """Truncated smoothness norm.

    Sobolev: ``sqrt(sum k**(2 beta) f_k**2)``; Hoelder:
    ``max 2**(l (1/2 + beta)) |f_lk|``; Besov:
    ``(sum_l 2**(r l (beta + 1/2 - 1/r)) sum_k |f_lk|**r)**(1/r)``.
    Wavelet positions carry their dyadic level (position 0 is level 0).
    """
    vals = _layout_values(f, ball)
    if ball.kind == "Sobolev":
        k = np.arange(1, vals.size + 1, dtype=float)
        return float(math.sqrt(np.sum(k ** (2 * ball.beta) * vals**2)))
    lev = dyadic_levels(vals.size).astype(float)
    if ball.kind == "Holder":
        if vals.size == 0:
            return 0.0
        return float(np.max(2.0 ** (lev * (0.5 + ball.beta)) * np.abs(vals)))
    r = ball.r
    w = 2.0 ** (r * lev * (ball.beta + 0.5 - 1.0 / r))
    return float(np.sum(w * np.abs(vals) ** r) ** (1.0 / r))


def membership(f, ball):
    """``ball_norm <= L``; for Hoelder this is the levelwise bound with ``<=``."""
    return ball_norm(f, ball) <= ball.L


@dataclass(frozen=True)
class RateSpec:
    """Contraction-rate formula.

    ``L2_ht`` and ``L2_ot`` are the Sobolev/L2 rates of the polynomial and
    oversmoothed priors; ``Linf_ht`` and ``Linf_ot`` the Hoelder/sup-norm
    versions.
    """

    flavor: str
    beta: float
    kappa: float = 0.0
    delta: float = 0.5

    def __post_init__(self):
        if self.flavor not in RATE_FLAVORS:
            raise DomainError(f"unknown rate flavor {self.flavor!r}")
        if not self.beta > 0 or self.kappa < 0 or not self.delta > 0:
            raise DomainError("need beta > 0, kappa >= 0, delta > 0")


def rate_epsilon_n(spec, n):
    """Evaluate the rate at ``n`` (natural logs)."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 3):
        raise DomainError("rates are defined for n >= 3")
    b, k, d = spec.beta, spec.kappa, spec.delta
    poly = n ** (-b / (2 * b + 1))
    ln = np.log(n)
    if spec.flavor == "L2_ht":
        out = ln ** ((1 + (1 + k) * b) / (2 * b + 1)) * poly
    elif spec.flavor == "L2_ot":
        out = ln ** ((1 + k) * (1 + d) * b / (2 * b + 1)) * poly
    elif spec.flavor == "Linf_ht":
        out = np.log(ln) ** (2 / (1 + 2 * b)) * ln ** ((1 + (1 + k) * b) / (1 + 2 * b)) * poly
    else:
        out = ln ** ((2 + 2 * k) * b / (1 + 2 * b)) * poly
    return float(out) if out.ndim == 0 else out


@dataclass
class PriorMassEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    hits: int
    n_mc: int


_NORM_ORD = {"L2": 2, "Linf": np.inf}


def prior_mass_estimate(prior, f0, eps, n_mc=10_000, rng_seed=0, norm="L2", batch=20_000):
    """Monte Carlo estimate of ``Pi(||f - f0|| < eps)`` with a Wilson interval.

    ``f0`` is truncated or zero-padded to the prior's size.  Draws are
    generated in batches so memory stays bounded.
    """
    if not isinstance(prior, PriorSpec):
        raise DomainError("prior must be a PriorSpec")
    if norm not in _NORM_ORD:
        raise DomainError(f"norm must be one of {sorted(_NORM_ORD)}")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    n_mc = int(n_mc)
    if n_mc < 1:
        raise DomainError("n_mc must be positive")
    size = prior.size
    target = np.zeros(size)
    t = np.asarray(getattr(f0, "values", f0), dtype=float)
    target[: min(size, t.size)] = t[:size]
    scales = prior.scales()
    rng = make_rng(rng_seed)
    hits = 0
    done = 0
    while done < n_mc:
        m = min(batch, n_mc - done)
        f = scales * tail_sample(prior.tail, rng, (m, size))
        dist = np.linalg.norm(f - target, ord=_NORM_ORD[norm], axis=1)
        hits += int(np.count_nonzero(dist < eps))
        done += m
    ci = stats.binomtest(hits, n_mc).proportion_ci(confidence_level=0.95, method="wilson")
    return PriorMassEstimate(hits / n_mc, float(ci.low), float(ci.high), hits, n_mc)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def fit_rate_slope(pairs):
    """Least-squares fit of ``log error`` on ``log n``."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise DomainError("need at least three (n, error) pairs")
    n, err = arr[:, 0], arr[:, 1]
    if np.any(np.diff(n) <= 0):
        raise DomainError("n must be strictly increasing")
    if np.any(err <= 0) or np.any(n <= 0):
        raise DomainError("n and errors must be positive")
    res = stats.linregress(np.log(n), np.log(err))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


def bvm_coordinate_check(draws, x, n, coords):
    """KS statistic of ``sqrt(n) (f_c - x_c)`` against N(0, 1) for each coordinate.

    ``draws`` is a :class:`ChainOutput` or an array of shape
    ``(n_draws, dim)``.  Returns ``{coord: (statistic, p_value)}``.
    """
    d = np.asarray(getattr(draws, "draws", draws), dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = {}
    for c in coords:
        if not 0 <= int(c) < min(d.shape[1], x.size):
            raise DomainError(f"coordinate {c} out of range")
        z = math.sqrt(n) * (d[:, int(c)] - x[int(c)])
        res = stats.kstest(z, "norm")
        out[int(c)] = (float(res.statistic), float(res.pvalue))
    return out


@dataclass
class PriorMassTrend:
    n_grid: list
    eps: list
    d1: float
    estimates: list
    ratios: list


def prior_mass_trend(prior, f0, n_grid, rate, d1, n_mc=100_000, rng_seed=0):
    """``log p_hat / (n eps_n**2)`` over a grid of ``n`` for the ball of radius ``d1 eps_n``."""
    ests, ratios, epss = [], [], []
    for i, n in enumerate(n_grid):
        e = rate_epsilon_n(rate, n)
        est = prior_mass_estimate(prior, f0, d1 * e, n_mc, rng_seed=derive_rng(rng_seed, i))
        ests.append(est)
        epss.append(e)
        ratios.append(math.log(est.p_hat) / (n * e * e) if est.p_hat > 0 else -math.inf)
    return PriorMassTrend(list(n_grid), epss, d1, ests, ratios)


def calibrate_d1(prior, f0, n, rate, target_ratio=-1.0, n_mc=100_000, rng_seed=0,
                 candidates=np.geomspace(0.05, 20.0, 41)):
    """Smallest ``d1`` on a grid with ``log p_hat / (n eps_n**2) >= target_ratio``."""
    e = rate_epsilon_n(rate, n)
    for d1 in candidates:
        est = prior_mass_estimate(prior, f0, d1 * e, n_mc, rng_seed)
        if est.p_hat > 0 and math.log(est.p_hat) / (n * e * e) >= target_ratio:
            return float(d1)
    raise DomainError("no candidate d1 reaches the target ratio")
