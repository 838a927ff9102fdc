"""Heavy-tailed series priors: scale sequences, tail densities and sampling."""

from dataclasses import dataclass, field, asdict
import math

import numpy as np
from scipy import special

from ._random import make_rng
from .exceptions import DomainError
from .wavelet import CoefficientField, dyadic_levels

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)

SCALE_KINDS = ("OT", "HT", "GaussianScale")
TAIL_KINDS = ("StudentT", "Cauchy", "Gaussian", "Laplace")


@dataclass(frozen=True)
class ScaleSpec:
    """Deterministic scale sequence of a series prior.

    ``OT``
        ``exp(-a (log k)**(1+delta))`` (single index) or
        ``2**(-a l**(1+delta))`` (wavelet level ``l``).
    ``HT`` and ``GaussianScale``
        ``k**(-1/2-alpha)`` or ``2**(-l (1/2+alpha))``.  ``GaussianScale``
        is the same sequence meant to be paired with a Gaussian tail.
    """

    kind: str = "OT"
    a: float = 1.0
    delta: float = 0.5
    alpha: float = 1.0
    index_layout: str = "single"

    def __post_init__(self):
        if self.kind not in SCALE_KINDS:
            raise DomainError(f"unknown scale kind {self.kind!r}")
        if self.index_layout not in ("single", "wavelet"):
            raise DomainError(f"unknown index layout {self.index_layout!r}")
        if self.kind == "OT" and not (self.a > 0 and self.delta > 0):
            raise DomainError("OT scales need a > 0 and delta > 0")
        if self.kind != "OT" and not self.alpha > 0:
            raise DomainError("polynomial scales need alpha > 0")

    @classmethod
    def ot(cls, a=1.0, delta=0.5, layout="single"):
        return cls("OT", a=a, delta=delta, index_layout=layout)

    @classmethod
    def ht(cls, alpha, layout="single"):
        return cls("HT", alpha=alpha, index_layout=layout)

    @classmethod
    def gaussian(cls, alpha, layout="single"):
        return cls("GaussianScale", alpha=alpha, index_layout=layout)


def eval_scale(spec, index):
    """Scale at ``k >= 1`` (single layout) or level ``l >= 0`` (wavelet layout).

    Accepts scalars or arrays; natural logarithms throughout.
    """
    idx = np.asarray(index, dtype=float)
    if spec.index_layout == "single":
        if np.any(idx < 1):
            raise DomainError("single-index scales are defined for k >= 1")
        if spec.kind == "OT":
            out = np.exp(-spec.a * np.log(idx) ** (1 + spec.delta))
        else:
            out = idx ** (-0.5 - spec.alpha)
    else:
        if np.any(idx < 0):
            raise DomainError("wavelet scales are defined for levels l >= 0")
        if spec.kind == "OT":
            out = 2.0 ** (-spec.a * idx ** (1 + spec.delta))
        else:
            out = 2.0 ** (-idx * (0.5 + spec.alpha))
    return float(out) if out.ndim == 0 else out


def scale_vector(spec, size, coarse_level=0):
    """Scales for every flat position of a truncated field of length ``size``.

    Wavelet positions use their dyadic level counted from ``coarse_level``:
    detail level ``j`` gets the scale of level ``j - coarse_level`` and the
    whole scaling block gets the level-0 scale.  With ``coarse_level=0``
    the position ``2**l + k`` simply carries level ``l``.
    """
    if spec.index_layout == "single":
        return eval_scale(spec, np.arange(1, size + 1))
    return eval_scale(spec, np.maximum(dyadic_levels(size) - int(coarse_level), 0))


@dataclass(frozen=True)
class TailDensity:
    """Symmetric coordinate law of a series prior.

    ``kappa`` is the declared exponent in the polylogarithmic bound on
    ``log(1/h)`` and ``q_moments`` the declared highest finite absolute
    moment order.  Gaussian and Laplace are comparison baselines:
    ``heavy_tailed`` is False for them.
    """

    kind: str = "Cauchy"
    nu: float = 1.0
    kappa: float = field(default=None)
    q_moments: float = field(default=None)

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise DomainError(f"unknown tail kind {self.kind!r}")
        if self.kind == "StudentT" and not self.nu > 0:
            raise DomainError("StudentT needs nu > 0")
        if self.kind == "Cauchy":
            object.__setattr__(self, "nu", 1.0)
        if self.kappa is None:
            object.__setattr__(self, "kappa", 0.0 if self.heavy_tailed else 1.0)
        if self.q_moments is None:
            object.__setattr__(self, "q_moments", _declared_q(self))

    @classmethod
    def student(cls, nu):
        return cls("StudentT", nu=nu)

    @classmethod
    def cauchy(cls):
        return cls("Cauchy")

    @classmethod
    def gaussian(cls):
        return cls("Gaussian")

    @classmethod
    def laplace(cls):
        return cls("Laplace")

    @property
    def heavy_tailed(self):
        return self.kind in ("StudentT", "Cauchy")

    def to_dict(self):
        return asdict(self)


def _declared_q(h):
    # moments of order < nu exist; declare the float just below nu
    if h.heavy_tailed:
        return float(np.nextafter(h.nu, 0.0))
    return math.inf


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("tail density evaluated at a non-finite point")
    return x


def _student_logpdf(x, nu):
    ax = np.abs(x)
    const = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)
    return const - (nu + 1) / 2 * np.log1p(ax * ax / nu)


def tail_logpdf(h, x):
    x = _check_finite(x)
    ax = np.abs(x)
    if h.kind == "Gaussian":
        out = -0.5 * ax * ax - _LOG_SQRT_2PI
    elif h.kind == "Laplace":
        out = -ax - math.log(2.0)
    elif h.kind == "Cauchy":
        out = -math.log(math.pi) - np.log1p(ax * ax)
    else:
        out = _student_logpdf(ax, h.nu)
    return out[()] if out.ndim == 0 else out


def tail_pdf(h, x):
    return np.exp(tail_logpdf(h, x))


def tail_survival(h, x):
    """Upper tail ``int_x^inf h``; equals ``1 - cdf(x)`` for every real ``x``."""
    x = _check_finite(x)
    if h.kind == "Gaussian":
        out = special.ndtr(-x)
    elif h.kind == "Laplace":
        out = np.where(x >= 0, 0.5 * np.exp(-np.abs(x)), 1.0 - 0.5 * np.exp(-np.abs(x)))
    elif h.kind == "Cauchy":
        # arctan(1/x)/pi is exact-tailed for large positive x
        with np.errstate(divide="ignore"):
            out = np.where(x > 0, np.arctan(1.0 / np.where(x > 0, x, 1.0)) / math.pi, 0.5 - np.arctan(x) / math.pi)
    else:
        out = special.stdtr(h.nu, -x)
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def tail_logsurvival(h, x):
    """``log`` of :func:`tail_survival`, accurate far into the tail for x >= 0."""
    x = _check_finite(x)
    if h.kind == "Gaussian":
        out = special.log_ndtr(-x)
    elif h.kind == "Laplace":
        out = np.where(x >= 0, math.log(0.5) - np.abs(x), np.log1p(-0.5 * np.exp(-np.abs(x))))
    else:
        with np.errstate(divide="ignore"):
            out = np.log(tail_survival(h, x))
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def tail_cdf(h, x):
    return tail_survival(h, -np.asarray(x, dtype=float))


def tail_ppf(h, p):
    p = np.asarray(p, dtype=float)
    if h.kind == "Gaussian":
        out = special.ndtri(p)
    elif h.kind == "Laplace":
        out = np.where(p < 0.5, np.log(2 * p), -np.log(2 * (1 - p)))
    elif h.kind == "Cauchy":
        out = np.tan(math.pi * (p - 0.5))
    else:
        out = special.stdtrit(h.nu, p)
    return out[()] if np.ndim(out) == 0 else out


def tail_sample(h, rng, size=None):
    rng = make_rng(rng)
    if h.kind == "Gaussian":
        return rng.standard_normal(size)
    if h.kind == "Laplace":
        return rng.laplace(0.0, 1.0, size)
    if h.kind == "Cauchy":
        return rng.standard_cauchy(size)
    return rng.standard_t(h.nu, size)


def truncated_moment(h, q, T):
    """``int_{-T}^{T} |x|**q h(x) dx`` by quadrature on log-spaced panels."""
    from scipy.integrate import quad

    edges = np.concatenate([[0.0], np.geomspace(1e-3, T, 60)])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(lambda u: u**q * tail_pdf(h, u), lo, hi, limit=200, epsabs=0.0, epsrel=1e-11)
        total += val
    return 2.0 * total


@dataclass
class ConditionReport:
    """Outcome of :func:`check_conditions` on a grid.

    ``log_bound_c1`` / ``tail_bound_c2`` hold the smallest constants that
    validate the respective bound on the grid, or ``None`` when the bound
    fails (the normalized ratio keeps growing over the upper half of the
    grid).  ``moment_q`` is the empirical tail index read off the slope of
    ``log H(x)`` at the top of the grid; absolute moments of lower order
    are finite.
    """

    symmetric: bool
    decreasing: bool
    log_bound_c1: float | None
    tail_bound_c2: float | None
    moment_q: float
    kappa: float
    tail_exponent: float

    @property
    def log_bound_holds(self):
        return self.log_bound_c1 is not None

    @property
    def tail_bound_holds(self):
        return self.tail_bound_c2 is not None


def _bounded_ratio(grid, ratio, growth_tol):
    # The bound is deemed to fail when the ratio grows by more than
    # ``growth_tol`` between the geometric midpoint of the grid and its end.
    mid = np.searchsorted(grid, math.sqrt(grid[0] * grid[-1]))
    mid = min(max(mid, 0), grid.size - 1)
    upper = ratio[mid:]
    if upper.size and ratio[-1] > growth_tol * max(np.max(ratio[: mid + 1]), np.finfo(float).tiny):
        return None
    return float(np.max(ratio))


def check_conditions(h, grid, kappa=None, tail_exponent=2.0, growth_tol=2.0):
    """Empirical check of the heavy-tail conditions on a positive grid."""
    x = np.asarray(grid, dtype=float)
    if x.size == 0 or np.any(x <= 0) or np.any(np.diff(x) < 0):
        raise DomainError("grid must be nonempty, sorted and positive")
    kappa = h.kappa if kappa is None else kappa
    pdf = tail_pdf(h, x)
    symmetric = bool(np.all(pdf == tail_pdf(h, -x)))
    decreasing = bool(np.all(np.diff(pdf) <= 0)) and bool(tail_pdf(h, 0.0) >= pdf[0])

    log_ratio = -tail_logpdf(h, x) / (1.0 + np.log1p(x) ** (1 + kappa))
    c1 = _bounded_ratio(x, log_ratio, growth_tol)

    tail_grid = x[x >= 1.0]
    surv = tail_survival(h, tail_grid) if tail_grid.size else np.array([])
    c2 = None
    if tail_grid.size:
        c2 = _bounded_ratio(tail_grid, tail_grid**tail_exponent * surv, growth_tol)

    top = x[-max(2, x.size // 10) :]
    log_s = tail_logsurvival(h, top)
    slope = np.polyfit(np.log(top), log_s, 1)[0] if top.size >= 2 else math.nan
    return ConditionReport(symmetric, decreasing, c1, c2, float(-slope), kappa, tail_exponent)


@dataclass(frozen=True)
class PriorSpec:
    """Series prior: scale sequence, tail law and explicit truncation.

    ``truncation`` is ``K`` (number of coordinates) in the single layout and
    the maximal level ``L`` in the wavelet layout, where the field holds
    ``2**(L+1)`` coefficients.
    """

    scale: ScaleSpec
    tail: TailDensity
    truncation: int
    coarse_level: int = 0

    def __post_init__(self):
        if int(self.truncation) < 1 and self.layout == "single":
            raise DomainError("truncation must be >= 1")
        if self.layout == "wavelet" and int(self.truncation) < 0:
            raise DomainError("maximal level must be >= 0")

    @property
    def layout(self):
        return self.scale.index_layout

    @property
    def size(self):
        if self.layout == "single":
            return int(self.truncation)
        return 1 << (int(self.truncation) + 1)

    def scales(self):
        return scale_vector(self.scale, self.size, self.coarse_level)

    def to_dict(self):
        return {"scale": asdict(self.scale), "tail": asdict(self.tail),
                "truncation": int(self.truncation), "coarse_level": int(self.coarse_level)}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        scale = data["scale"]
        tail = data["tail"]
        return cls(
            scale if isinstance(scale, ScaleSpec) else ScaleSpec(**scale),
            tail if isinstance(tail, TailDensity) else TailDensity(**tail),
            int(data["truncation"]),
            int(data.get("coarse_level", 0)),
        )


def sample_prior(spec, rng_seed, n_draws=None):
    """Draw ``f = scale * zeta`` with i.i.d. ``zeta`` from the tail law.

    Returns one field, or a field whose ``values`` has shape
    ``(n_draws, size)`` when ``n_draws`` is given.
    """
    rng = make_rng(rng_seed)
    shape = (spec.size,) if n_draws is None else (int(n_draws), spec.size)
    zeta = tail_sample(spec.tail, rng, shape)
    return CoefficientField(spec.scales() * zeta, spec.layout, spec.coarse_level)
