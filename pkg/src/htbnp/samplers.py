"""Function-space MCMC for series priors.

All samplers work in whitened coordinates ``xi`` that are i.i.d. standard
normal under the prior; the field is ``f = scales * T(xi)`` with ``T`` the
map carrying N(0, 1) onto the tail law.  For a Gaussian tail ``T`` is the
identity (up to sign) and whitened pCN reduces to plain pCN.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special, stats

from ._random import make_rng
from .chains import ChainOutput
from .exceptions import DomainError
from .priors import TailDensity, tail_logpdf, tail_logsurvival

XI_LIMIT = 37.5  # Phi(-37.5) ~ 5e-309, the last representable tail mass


def _norm_logsf(xi):
    return special.log_ndtr(-xi)


class WhiteningMap:
    """``T(xi) = Hbar^{-1}(Phi(xi))`` in signed form, so ``T(0) = 0``.

    For the Cauchy law this is ``tan(pi (1 - 2 Phi(xi)) / 2)``.  ``T`` is
    decreasing (its derivative is ``-phi(xi) / h(T(xi))``); the sign is
    immaterial by symmetry of the tail law.
    """

    def __init__(self, tail=None):
        self.tail = tail if tail is not None else TailDensity.cauchy()

    def __call__(self, xi):
        xi = np.clip(np.asarray(xi, dtype=float), -XI_LIMIT, XI_LIMIT)
        a = np.abs(xi)
        kind = self.tail.kind
        if kind == "Gaussian":
            mag = a
        elif kind == "Cauchy":
            # |T| = cot(pi Phi(-|xi|)); for tiny tail mass use 1/(pi p)
            p = special.ndtr(-a)
            with np.errstate(divide="ignore"):
                mag = np.where(p > 1e-8, 1.0 / np.tan(math.pi * p),
                               np.exp(-math.log(math.pi) - _norm_logsf(a)) - p * math.pi / 3)
        elif kind == "StudentT":
            mag = stats.t.isf(special.ndtr(-a), self.tail.nu)
            mag = np.where(a == 0, 0.0, mag)
        elif kind == "Laplace":
            mag = -_norm_logsf(a) - math.log(2.0)
            mag = np.maximum(mag, 0.0)
        else:
            raise DomainError(f"no whitening map for tail {kind!r}")
        out = -np.sign(xi) * mag
        return float(out) if out.ndim == 0 else out

    def inverse(self, zeta):
        """``xi`` with ``T(xi) = zeta``; exact through log survival functions."""
        zeta = np.asarray(zeta, dtype=float)
        a = np.abs(zeta)
        if self.tail.kind == "Gaussian":
            mag = a
        else:
            mag = -special.ndtri_exp(tail_logsurvival(self.tail, a))
            mag = np.where(a == 0, 0.0, mag)
        out = -np.sign(zeta) * np.minimum(mag, XI_LIMIT)
        return float(out) if out.ndim == 0 else out

    def derivative(self, xi, t=None):
        """``dT/dxi``; pass ``t = T(xi)`` to reuse a cached value."""
        xi = np.asarray(xi, dtype=float)
        t = self(xi) if t is None else np.asarray(t, dtype=float)
        log_phi = -0.5 * xi * xi - 0.5 * math.log(2 * math.pi)
        if self.tail.kind == "Cauchy":
            out = -math.pi * np.exp(log_phi) * (1.0 + t * t)
        elif self.tail.kind == "Gaussian":
            out = -np.ones_like(xi)
        else:
            out = -np.exp(log_phi - tail_logpdf(self.tail, t))
        return float(out) if out.ndim == 0 else out


def whiten_transform(xi, tail=None):
    """The whitening map ``T`` applied elementwise (Cauchy by default)."""
    return WhiteningMap(tail)(xi)


def whiten_inverse(zeta, tail=None):
    return WhiteningMap(tail).inverse(zeta)


@dataclass
class WhitenedState:
    """Whitened coordinates with the cached field ``f = scales * T(xi)``.

    ``loglik`` and ``grad`` cache the likelihood at ``f`` (``grad`` is the
    gradient with respect to ``f``, present only for gradient samplers).
    """

    xi: np.ndarray
    f: np.ndarray
    loglik: float
    grad: np.ndarray | None = None


class FieldMap:
    """Pushes whitened coordinates to a field: ``f = scales * T(xi)``."""

    def __init__(self, scales, tail=None):
        self.scales = np.asarray(scales, dtype=float)
        self.T = WhiteningMap(tail)

    def field(self, xi):
        return self.scales * self.T(xi)

    def xi_of(self, f):
        return self.T.inverse(np.asarray(f, dtype=float) / self.scales)

    def pull_back(self, xi, f, grad_f):
        """Chain rule: gradient in ``xi`` from the gradient in ``f``."""
        safe = np.where(self.scales > 0, self.scales, 1.0)
        t = np.where(self.scales > 0, f / safe, self.T(xi))
        return grad_f * self.scales * self.T.derivative(xi, t)


def _evaluate(fmap, loglik, xi, with_grad):
    f = fmap.field(xi)
    if with_grad:
        ll, g = loglik(f)
        g = np.asarray(g, dtype=float)
    else:
        ll, g = loglik(f), None
    return WhitenedState(xi, f, float(ll), g)


def make_state(fmap, loglik, xi, with_grad=False):
    xi = np.array(xi, dtype=float)
    state = _evaluate(fmap, loglik, xi, with_grad)
    if not np.isfinite(state.loglik):
        raise DomainError("initial state has non-finite log-likelihood")
    return state


def pcn_step(state, loglik, beta, fmap, rng):
    """One (whitened) pCN move.  Returns ``(state, accepted, nonfinite)``.

    The proposal ``sqrt(1 - beta**2) xi + beta eta`` preserves the N(0, I)
    reference, so the acceptance ratio involves the likelihood only.
    """
    if not 0 <= beta <= 1:
        raise DomainError("beta must lie in [0, 1]")
    eta = rng.standard_normal(state.xi.shape)
    xi = math.sqrt(1.0 - beta * beta) * state.xi + beta * eta
    prop = _evaluate(fmap, loglik, xi, False)
    if not np.isfinite(prop.loglik):
        rng.uniform()
        return state, False, True
    if math.log(rng.uniform()) < prop.loglik - state.loglik:
        return prop, True, False
    return state, False, False


def _mala_coefficients(step):
    step = np.asarray(step, dtype=float)
    a = (2.0 - step) / (2.0 + step)
    b = 2.0 * step / (2.0 + step)
    c = np.sqrt(8.0 * step) / (2.0 + step)
    return a, b, c


def whitened_mala_step(state, loglik_grad, step, fmap, rng):
    """One whitened infinity-MALA move.  Returns ``(state, accepted, nonfinite)``.

    Semi-implicit (theta = 1/2) Langevin discretization preconditioned by
    the N(0, I) reference:
    ``xi' = a xi + b grad + c eta`` with ``a = (2-h)/(2+h)``,
    ``b = 2h/(2+h)``, ``c = sqrt(8h)/(2+h)``, followed by the exact
    Metropolis-Hastings correction.  ``loglik_grad(f)`` returns the
    log-likelihood and its gradient in ``f``.  ``step`` may be a vector of
    per-coordinate steps (a fixed diagonal preconditioner); each coordinate
    then still leaves N(0, 1) invariant when the gradient vanishes.
    """
    if not np.all(np.asarray(step) > 0):
        raise DomainError("step must be positive")
    a, b, c = _mala_coefficients(step)
    g0 = fmap.pull_back(state.xi, state.f, state.grad)
    mean_fwd = a * state.xi + b * g0
    xi = mean_fwd + c * rng.standard_normal(state.xi.shape)
    prop = _evaluate(fmap, loglik_grad, xi, True)
    u = rng.uniform()
    if not (np.isfinite(prop.loglik) and np.all(np.isfinite(prop.grad))):
        return state, False, True
    g1 = fmap.pull_back(prop.xi, prop.f, prop.grad)
    mean_bwd = a * prop.xi + b * g1
    inv2c2 = 1.0 / (2.0 * c * c)
    log_fwd = -np.sum((xi - mean_fwd) ** 2 * inv2c2)
    log_bwd = -np.sum((state.xi - mean_bwd) ** 2 * inv2c2)
    log_ratio = (prop.loglik - 0.5 * np.dot(xi, xi) + log_bwd
                 - state.loglik + 0.5 * np.dot(state.xi, state.xi) - log_fwd)
    if math.log(u) < log_ratio:
        return prop, True, False
    return state, False, False


def gauss_newton_precision(fmap, xi, fisher):
    """Diagonal posterior precision in ``xi``: ``fisher * (df/dxi)**2 + 1``."""
    d = fmap.scales * fmap.T.derivative(xi)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(fisher, dtype=float) * d * d + 1.0
    return np.where(np.isfinite(out), out, np.finfo(float).max)


@dataclass
class SamplerConfig:
    """Run settings shared by the field samplers.

    algorithm: ``PCN``, ``WhitenedPCN``, ``WhitenedMALA`` or ``MwGGaussian``.
    ``beta`` / ``step`` are the initial tuning parameters; with ``adapt``
    they are tuned during burn-in towards ``target_accept`` and frozen
    afterwards.  ``init`` is ``prior_draw``, ``data`` or ``custom``.
    """

    algorithm: str = "WhitenedPCN"
    n_draws: int = 2000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    init: str = "prior_draw"
    beta: float = 0.2
    step: float = 1e-3
    adapt: bool = True
    target_accept: float | None = None
    alpha_proposal_sd: float = 0.5
    parametrization: str = "noncentered"

    def __post_init__(self):
        if self.algorithm not in ("PCN", "WhitenedPCN", "WhitenedMALA", "MwGGaussian"):
            raise DomainError(f"unknown algorithm {self.algorithm!r}")
        if not 0 <= self.beta <= 1:
            raise DomainError("beta must lie in [0, 1]")
        if not self.step > 0:
            raise DomainError("step must be positive")
        if not (self.n_draws > self.burn_in >= 0 and self.thin >= 1):
            raise DomainError("need n_draws > burn_in >= 0 and thin >= 1")
        if self.init not in ("prior_draw", "data", "custom"):
            raise DomainError(f"unknown init {self.init!r}")
        if self.parametrization not in ("centered", "noncentered"):
            raise DomainError(f"unknown parametrization {self.parametrization!r}")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _adapt(log_param, accepted, target, i):
    """Robbins-Monro update of a log tuning parameter."""
    return log_param + (float(accepted) - target) / (i + 1) ** 0.6


def run_field_sampler(fmap, loglik, config, init_xi=None, rng_seed=None, callback=None,
                      fisher=None, refresh=500):
    """Run pCN, whitened pCN or whitened MALA and return a :class:`ChainOutput`.

    ``loglik(f)`` returns a float for pCN samplers and ``(float, grad)``
    for MALA.  Draws are fields ``f`` kept every ``thin`` iterations after
    burn-in; ``traces["running_mean"]`` is the mean over all post-burn-in
    iterations.

    For MALA, ``fisher`` (the diagonal Fisher information of the likelihood
    in ``f``) turns on a diagonal preconditioner: coordinate ``i`` uses step
    ``h / P_i`` with ``P_i`` the Gauss-Newton precision in ``xi``,
    recomputed every ``refresh`` burn-in iterations and frozen afterwards.
    """
    cfg = config
    if cfg.algorithm == "PCN" and fmap.T.tail.kind != "Gaussian":
        raise DomainError("plain pCN needs a Gaussian prior; use WhitenedPCN")
    if cfg.algorithm == "MwGGaussian":
        raise DomainError("use mwg_hierarchical_gaussian for MwGGaussian")
    rng = make_rng(cfg.seed if rng_seed is None else rng_seed)
    mala = cfg.algorithm == "WhitenedMALA"
    dim = fmap.scales.size
    xi0 = rng.standard_normal(dim) if init_xi is None else np.asarray(init_xi, dtype=float)
    state = make_state(fmap, loglik, xi0, with_grad=mala)
    target = cfg.target_accept if cfg.target_accept is not None else (0.574 if mala else 0.25)
    log_param = math.log(cfg.step if mala else max(cfg.beta, 1e-12))
    precond = 1.0
    if mala and fisher is not None:
        precond = 1.0 / gauss_newton_precision(fmap, state.xi, fisher)

    n_keep = (cfg.n_draws - cfg.burn_in) // cfg.thin
    draws = np.empty((n_keep, dim))
    lp = np.empty(n_keep)
    total = np.zeros(dim)
    accepted = 0
    post_accepted = 0
    nonfinite = 0
    kept = 0
    for i in range(cfg.n_draws):
        if mala:
            state, acc, bad = whitened_mala_step(state, loglik, math.exp(log_param) * precond, fmap, rng)
        else:
            beta = min(math.exp(log_param), 1.0)
            state, acc, bad = pcn_step(state, loglik, beta, fmap, rng)
        accepted += acc
        nonfinite += bad
        if i < cfg.burn_in:
            if cfg.adapt:
                log_param = _adapt(log_param, acc, target, i)
                if not mala:
                    log_param = min(log_param, 0.0)
            if mala and fisher is not None and (i + 1) % refresh == 0:
                precond = 1.0 / gauss_newton_precision(fmap, state.xi, fisher)
            continue
        post_accepted += acc
        total += state.f
        j = i - cfg.burn_in
        if (j + 1) % cfg.thin == 0 and kept < n_keep:
            draws[kept] = state.f
            lp[kept] = state.loglik - 0.5 * float(np.dot(state.xi, state.xi))
            kept += 1
        if callback is not None:
            callback(i, state)
    tuned = math.exp(log_param)
    conf = cfg.to_dict()
    conf["tuned_" + ("step" if mala else "beta")] = min(tuned, 1.0) if not mala else tuned
    conf["preconditioned"] = bool(mala and fisher is not None)
    return ChainOutput(
        draws[:kept],
        acceptance={"field": accepted / cfg.n_draws,
                    "field_post_burn_in": post_accepted / (cfg.n_draws - cfg.burn_in)},
        log_posterior=lp[:kept],
        traces={"running_mean": total / (cfg.n_draws - cfg.burn_in)},
        seed=cfg.seed if rng_seed is None else (rng_seed if isinstance(rng_seed, int) else None),
        config=conf,
        rejected_nonfinite=nonfinite,
    )


def gaussian_loglik(x, n, multipliers=None, rho=1.0):
    """Tempered sequence-model log-likelihood and gradient, up to a constant.

    ``rho * n / 2 * ||x - kappa f||^2`` with ``kappa`` the forward
    multipliers (identity if ``None``).
    """
    x = np.asarray(x, dtype=float)
    kappa = np.ones_like(x) if multipliers is None else np.asarray(multipliers, dtype=float)

    def loglik(f):
        r = x - kappa * f
        return -0.5 * rho * n * float(np.dot(r, r)), rho * n * kappa * r

    return loglik


def mwg_hierarchical_gaussian(x, n, scale_index, layout="single", multipliers=None, rho=1.0,
                              config=None, sample_tau=True, alpha=None, tau=None):
    """Metropolis-within-Gibbs for ``f_k ~ N(0, (tau s_k(alpha))**2)``.

    ``s_k(alpha) = k**(-1/2 - alpha)`` (single layout, ``scale_index`` holds
    ``k``) or ``2**(-l (1/2 + alpha))`` (wavelet layout, ``scale_index``
    holds the level ``l``).  Hyperpriors: ``alpha ~ Exp(1)`` and
    ``tau ~ InvGamma(1, 1)``; pass ``sample_tau=False`` to keep ``tau``
    fixed (default 1) and ``alpha`` together with ``config.adapt=False``
    and a zero proposal scale to freeze ``alpha``.

    Each sweep draws ``f | alpha, tau, X`` exactly from its conjugate
    Gaussian law, then updates ``log alpha`` and ``log tau`` by random-walk
    Metropolis.  In the centered parametrization the hyperparameter
    updates condition on ``f``; in the noncentered one they condition on
    ``z = f / (tau s(alpha))`` and the data, which decouples them from
    ``f`` when the likelihood is weak.  ``x=None`` switches the
    likelihood off.
    """
    cfg = config if config is not None else SamplerConfig("MwGGaussian")
    idx = np.asarray(scale_index, dtype=float)
    dim = idx.size
    have_data = x is not None
    xv = np.zeros(dim) if not have_data else np.asarray(x, dtype=float)
    if xv.shape != idx.shape:
        raise DomainError("data and scale index lengths differ")
    kappa = np.ones(dim) if multipliers is None else np.asarray(multipliers, dtype=float)
    prec_lik = (rho * n * kappa**2) if have_data else np.zeros(dim)
    lin = (rho * n * kappa * xv) if have_data else np.zeros(dim)
    rng = make_rng(cfg.seed)

    if layout == "single":
        if np.any(idx < 1):
            raise DomainError("single-index scales need k >= 1")
        log_base = np.log(idx)
    else:
        if np.any(idx < 0):
            raise DomainError("wavelet levels must be >= 0")
        log_base = idx * math.log(2.0)

    def s2_of(al):
        return np.exp(-(1.0 + 2.0 * al) * log_base)

    def log_prior_f(f, al, ta):
        v = ta * ta * s2_of(al)
        return float(-0.5 * np.sum(f * f / v + np.log(v)))

    def log_lik(f):
        if not have_data:
            return 0.0
        r = xv - kappa * f
        return -0.5 * rho * n * float(np.dot(r, r))

    def log_hyper(al, ta):
        lp = -al
        if sample_tau:
            lp += -2.0 * math.log(ta) - 1.0 / ta
        return lp

    al = float(alpha) if alpha is not None else float(rng.exponential())
    ta = float(tau) if tau is not None else (1.0 / rng.gamma(1.0) if sample_tau else 1.0)
    freeze_alpha = alpha is not None and cfg.alpha_proposal_sd == 0

    def draw_f(al, ta):
        prec = prec_lik + 1.0 / (ta * ta * s2_of(al))
        return lin / prec + rng.standard_normal(dim) / np.sqrt(prec)

    f = draw_f(al, ta)
    log_sd = {"alpha": math.log(max(cfg.alpha_proposal_sd, 1e-12)), "tau": math.log(0.5)}
    acc = {"alpha": 0, "tau": 0}
    n_keep = (cfg.n_draws - cfg.burn_in) // cfg.thin
    draws = np.empty((n_keep, dim))
    a_trace = np.empty(n_keep)
    t_trace = np.empty(n_keep)
    lp_trace = np.empty(n_keep)
    total = np.zeros(dim)
    kept = 0

    def update(name, al, ta, f, i):
        cur = al if name == "alpha" else ta
        prop = cur * math.exp(math.exp(log_sd[name]) * rng.standard_normal())
        al_p, ta_p = (prop, ta) if name == "alpha" else (al, prop)
        if cfg.parametrization == "centered":
            f_p = f
            lr = log_prior_f(f, al_p, ta_p) - log_prior_f(f, al, ta)
        else:
            f_p = f * (ta_p / ta) * np.sqrt(s2_of(al_p) / s2_of(al))
            lr = log_lik(f_p) - log_lik(f)
        # log-scale walk: Jacobian term log(prop/cur)
        lr += log_hyper(al_p, ta_p) - log_hyper(al, ta) + math.log(prop / cur)
        ok = math.log(rng.uniform()) < lr
        if i < cfg.burn_in and cfg.adapt:
            log_sd[name] = _adapt(log_sd[name], ok, 0.44, i)
        if ok:
            acc[name] += 1
            return al_p, ta_p, f_p
        return al, ta, f

    for i in range(cfg.n_draws):
        f = draw_f(al, ta)
        if not freeze_alpha:
            al, ta, f = update("alpha", al, ta, f, i)
        if sample_tau:
            al, ta, f = update("tau", al, ta, f, i)
        if i < cfg.burn_in:
            continue
        total += f
        j = i - cfg.burn_in
        if (j + 1) % cfg.thin == 0 and kept < n_keep:
            draws[kept] = f
            a_trace[kept] = al
            t_trace[kept] = ta
            lp_trace[kept] = log_lik(f) + log_prior_f(f, al, ta) + log_hyper(al, ta)
            kept += 1
    conf = cfg.to_dict()
    conf.update(alpha_proposal_sd_tuned=math.exp(log_sd["alpha"]),
                tau_proposal_sd_tuned=math.exp(log_sd["tau"]), sample_tau=sample_tau)
    return ChainOutput(
        draws[:kept],
        acceptance={"alpha": acc["alpha"] / cfg.n_draws, "tau": acc["tau"] / cfg.n_draws, "f": 1.0},
        log_posterior=lp_trace[:kept],
        traces={"alpha": a_trace[:kept], "tau": t_trace[:kept],
                "running_mean": total / (cfg.n_draws - cfg.burn_in)},
        seed=cfg.seed,
        config=conf,
    )


@dataclass
class CredibleRegion:
    mean: np.ndarray
    indices: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    radius: float


_NORMS = {"L1": 1, "L2": 2, "Linf": np.inf}


def credible_region(draws, level=0.95, norm="L2", weights=None):
    """Keep the ``ceil(level * N)`` draws closest to the sample mean.

    Distances are discrete norms of ``draw - mean`` (rows of ``draws``),
    optionally weighted by ``weights`` (e.g. a grid spacing for L1 on
    function values).  ``lower``/``upper`` is the pointwise envelope of
    the retained draws.
    """
    d = np.asarray(draws, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    if d.shape[0] == 0:
        raise DomainError("credible_region needs at least one draw")
    if not 0 < level <= 1:
        raise DomainError("level must lie in (0, 1]")
    if norm not in _NORMS:
        raise DomainError(f"norm must be one of {sorted(_NORMS)}")
    mean = d.mean(axis=0)
    diff = d - mean
    if weights is not None:
        diff = diff * np.asarray(weights, dtype=float) ** (1.0 / _NORMS[norm] if norm != "Linf" else 0)
    dist = np.linalg.norm(diff, ord=_NORMS[norm], axis=1)
    keep = math.ceil(level * d.shape[0] - 1e-9)
    idx = np.sort(np.argsort(dist, kind="stable")[:keep])
    sub = d[idx]
    return CredibleRegion(mean, idx, sub.min(axis=0), sub.max(axis=0), float(dist[idx].max()))
