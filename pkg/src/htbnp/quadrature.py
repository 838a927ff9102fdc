"""Log-domain adaptive Gauss-Kronrod quadrature for one-dimensional densities.

The integrand is supplied as a vectorized log-density ``logf``.  Each panel
keeps its own log-scale so that nothing underflows, and the first two
moments are integrated about a centre ``c`` (the highest node found) to
avoid cancellation in the variance.  Unbounded tails are mapped onto
``[0, 1)`` with ``theta = b + w t / (1 - t)``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from .exceptions import NumericalFailure

# 15-point Kronrod nodes/weights on [-1, 1] and the embedded 7-point Gauss weights.
_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]

FINITE, RIGHT_TAIL, LEFT_TAIL = 0, 1, -1
THETA_MAX = 1e150


def _nodes(kind, a, b, anchor, width):
    """Map Kronrod nodes of panels [a, b] (in panel coordinates) to theta.

    Returns ``theta`` and ``log|dtheta/du|`` including the half-width factor.
    Arrays broadcast over leading axes.
    """
    half = 0.5 * (b - a)
    u = 0.5 * (a + b)[..., None] + half[..., None] * _XK
    theta = np.where(kind[..., None] == FINITE, u, 0.0)
    with np.errstate(divide="ignore"):
        loghalf = np.log(half)
    logjac = np.broadcast_to(loghalf[..., None], u.shape).copy()
    tail = kind != FINITE
    if np.any(tail):
        one_minus = np.where(tail[..., None], 1.0 - u, 1.0)
        sgn = np.where(kind == LEFT_TAIL, -1.0, 1.0)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            stretch = width[..., None] * u / one_minus
            theta = np.where(tail[..., None], anchor[..., None] + sgn * stretch, theta)
            logjac = np.where(tail[..., None], logjac + np.log(width)[..., None] - 2 * np.log(one_minus), logjac)
    return theta, logjac


def _panel_integrals(logf, kind, a, b, anchor, width, center):
    """K15 and G7 integrals of moments 0..2 about ``center`` plus abs moments.

    Returns ``(logscale, kronrod[..., 3], gauss[..., 3], absk[..., 2], maxnode)``.
    """
    theta, logjac = _nodes(kind, a, b, anchor, width)
    # nodes squeezed against u = 1 overflow; keep them finite and let the density vanish there
    theta = np.clip(theta, -THETA_MAX, THETA_MAX)
    lv = logf(theta) + logjac
    lv = np.where(np.isnan(lv), -np.inf, lv)
    scale = np.max(lv, axis=-1)
    safe = np.where(np.isfinite(scale), scale, 0.0)
    w = np.exp(lv - safe[..., None])
    d = theta - np.asarray(center)[..., None] if np.ndim(center) else theta - center
    with np.errstate(over="ignore"):
        powers = np.stack([np.ones_like(d), d, d * d], axis=-1)
    powers = np.where((w > 0)[..., None], powers, 0.0)
    kron = np.einsum("...n,n,...nj->...j", w, _WK, powers)
    gauss = np.einsum("...n,n,...nj->...j", w, _WG, powers)
    absk = np.einsum("...n,n,...nj->...j", w, _WK, np.abs(powers[..., 1:]))
    arg = np.argmax(lv, axis=-1)
    maxnode = np.take_along_axis(theta, arg[..., None], axis=-1)[..., 0]
    return safe, scale, kron, gauss, absk, maxnode


@dataclass
class QuadratureResult:
    """Normalizing constant, moments and panel table of a 1-D density."""

    log_norm: float
    mean: float
    variance: float
    error: float
    panels: dict = field(repr=False, default_factory=dict)
    logf: object = field(repr=False, default=None)

    def quantile(self, p):
        """Left-continuous inverse CDF at probability ``p``."""
        return _quantile(self, p)


def initial_panels(breakpoints, tails=True, split=1):
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    a = []
    b = []
    for lo, hi in zip(bp[:-1], bp[1:]):
        edges = np.linspace(lo, hi, split + 1)
        a.extend(edges[:-1])
        b.extend(edges[1:])
    kind = [FINITE] * len(a)
    anchor = [0.0] * len(a)
    width = max(bp[-1] - bp[0], 1e-300)
    if tails:
        a += [0.0, 0.0]
        b += [1.0, 1.0]
        kind += [LEFT_TAIL, RIGHT_TAIL]
        anchor += [bp[0], bp[-1]]
    return {
        "kind": np.array(kind),
        "a": np.array(a, dtype=float),
        "b": np.array(b, dtype=float),
        "anchor": np.array(anchor, dtype=float),
        "width": np.full(len(a), width),
    }


def integrate_log_density(logf, breakpoints, rtol=1e-10, max_panels=4000, center=None, tails=True):
    """Adaptive integration of ``exp(logf)`` and its first two moments.

    Raises :class:`NumericalFailure` with the achieved relative error when
    ``max_panels`` is exhausted.
    """
    panels = initial_panels(breakpoints, tails=tails, split=2)
    if center is None:
        probe = np.unique(np.asarray(breakpoints, dtype=float))
        center = float(probe[np.argmax(logf(probe))])
    while True:
        safe, scale, kron, gauss, absk, maxnode = _panel_integrals(
            logf, panels["kind"], panels["a"], panels["b"], panels["anchor"], panels["width"], center
        )
        top = np.max(scale)
        if not np.isfinite(top):
            raise NumericalFailure("integrand vanishes on every panel", math.inf)
        rel = np.exp(np.where(np.isfinite(scale), safe - top, -np.inf))
        kr = kron * rel[:, None]
        err = np.abs(kron - gauss) * rel[:, None]
        totals = kr.sum(axis=0)
        abs_tot = np.concatenate([[totals[0]], (absk * rel[:, None]).sum(axis=0)])
        denom = np.where(abs_tot > 0, abs_tot, 1.0)
        norm_err = (err / denom).max(axis=1)
        total_err = norm_err.sum()
        if total_err <= rtol:
            break
        if panels["a"].size >= max_panels:
            raise NumericalFailure("quadrature did not converge", float(total_err))
        bad = norm_err > rtol / (4 * panels["a"].size)
        if bad.sum() > 200:
            bad &= norm_err >= np.partition(norm_err, -200)[-200]
        panels = _bisect(panels, bad)
    z = totals[0]
    m1 = totals[1] / z
    m2 = totals[2] / z
    var = max(m2 - m1 * m1, 0.0)
    panels["mass"] = kr[:, 0] / z
    panels["order"] = np.lexsort((panels["a"], _panel_position(panels)))
    return QuadratureResult(
        log_norm=float(top + math.log(z)),
        mean=float(center + m1),
        variance=float(var),
        error=float(total_err),
        panels={**panels, "top": top, "z": z, "center": center},
        logf=logf,
    )


def _bisect(panels, bad):
    keep = {k: v[~bad] for k, v in panels.items()}
    mid = 0.5 * (panels["a"][bad] + panels["b"][bad])
    left = {k: v[bad] for k, v in panels.items()}
    right = {k: v[bad] for k, v in panels.items()}
    left["b"] = mid
    right["a"] = mid.copy()
    return {k: np.concatenate([keep[k], left[k], right[k]]) for k in panels}


def _panel_position(panels):
    # sort key placing the left tail first, finite panels by a, right tail last
    kind = panels["kind"]
    return np.where(kind == LEFT_TAIL, 0, np.where(kind == FINITE, 1, 2))


def _theta_of(kind, u, anchor, width):
    if kind == FINITE:
        return u
    sgn = -1.0 if kind == LEFT_TAIL else 1.0
    return anchor + sgn * width * u / (1.0 - u)


def _partial_mass(res, i, u):
    """Normalized mass of panel ``i`` between its left end (in theta order) and ``u``."""
    p = res.panels
    kind = p["kind"][i]
    a, b = p["a"][i], p["b"][i]
    if kind == LEFT_TAIL:
        lo, hi = u, b
    else:
        lo, hi = a, u
    if hi <= lo:
        return 0.0
    arr = lambda v: np.array([v])
    safe, scale, kron, _, _, _ = _panel_integrals(
        res.logf, arr(kind), arr(lo), arr(hi), arr(p["anchor"][i]), arr(p["width"][i]), p["center"]
    )
    if not np.isfinite(scale[0]):
        return 0.0
    return float(kron[0, 0] * math.exp(safe[0] - p["top"]) / p["z"])


def _quantile(res, prob):
    if not 0.0 < prob < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    p = res.panels
    order = p["order"]
    # within the left tail, theta decreases in u, so panels there run in reverse
    lt = order[p["kind"][order] == LEFT_TAIL]
    lt = lt[np.argsort(-p["a"][lt])]
    order = np.concatenate([lt, order[p["kind"][order] != LEFT_TAIL]])
    cum = np.cumsum(p["mass"][order])
    j = int(np.searchsorted(cum, prob, side="left"))
    j = min(j, order.size - 1)
    i = order[j]
    before = cum[j - 1] if j > 0 else 0.0
    target = prob - before
    kind = p["kind"][i]
    a, b = p["a"][i], p["b"][i]
    total = p["mass"][i]
    if total <= 0:
        u = a if kind != LEFT_TAIL else b
    else:
        # for the left tail the in-panel CDF grows as u decreases
        g = lambda u: _partial_mass(res, i, u) - target
        ga, gb = g(a), g(b)
        if ga * gb < 0:
            u = brentq(g, a, b, xtol=1e-15 * max(1.0, abs(b)), rtol=1e-13)
        else:
            u = (a if abs(ga) < abs(gb) else b)
    return float(_theta_of(kind, u, p["anchor"][i], p["width"][i]))


def batch_integrate(logf, breakpoints, rtol=1e-10, split=4, center=None):
    """Non-adaptive pass over many problems at once.

    ``breakpoints`` has shape ``(m, r)`` (sorted per row) and ``logf`` maps an
    array of shape ``(m, panels, 15)`` to log-density values.  Returns
    ``(log_norm, mean, variance, ok)`` where ``ok`` flags rows whose
    Gauss-Kronrod error estimate meets ``rtol``; callers re-run the others
    with :func:`integrate_log_density`.
    """
    bp = np.sort(np.asarray(breakpoints, dtype=float), axis=1)
    m, r = bp.shape
    frac = np.linspace(0.0, 1.0, split + 1)
    lo = bp[:, :-1, None] + (bp[:, 1:, None] - bp[:, :-1, None]) * frac[None, None, :-1]
    hi = bp[:, :-1, None] + (bp[:, 1:, None] - bp[:, :-1, None]) * frac[None, None, 1:]
    a = lo.reshape(m, -1)
    b = hi.reshape(m, -1)
    width = np.maximum(bp[:, -1] - bp[:, 0], 1e-300)
    kind = np.zeros(a.shape, dtype=int)
    anchor = np.zeros(a.shape)
    wid = np.broadcast_to(width[:, None], a.shape)
    a = np.concatenate([a, np.zeros((m, 2))], axis=1)
    b = np.concatenate([b, np.ones((m, 2))], axis=1)
    kind = np.concatenate([kind, np.tile([LEFT_TAIL, RIGHT_TAIL], (m, 1))], axis=1)
    anchor = np.concatenate([anchor, np.stack([bp[:, 0], bp[:, -1]], axis=1)], axis=1)
    wid = np.concatenate([wid, np.stack([width, width], axis=1)], axis=1)
    # drop degenerate panels (coincident breakpoints)
    degenerate = (kind == FINITE) & (b <= a)
    b = np.where(degenerate, a + 1e-300, b)
    if center is None:
        center = bp[np.arange(m), np.argmax(logf(bp[:, :, None])[..., 0], axis=1)]
    safe, scale, kron, gauss, absk, _ = _panel_integrals(logf, kind, a, b, anchor, wid, center[:, None])
    safe = np.where(degenerate, -np.inf, safe)
    scale = np.where(degenerate, -np.inf, scale)
    top = np.max(scale, axis=1)
    rel = np.exp(np.where(np.isfinite(scale), safe - top[:, None], -np.inf))
    kr = (kron * rel[..., None]).sum(axis=1)
    err = (np.abs(kron - gauss) * rel[..., None]).sum(axis=1)
    abs_tot = np.concatenate([kr[:, :1], (absk * rel[..., None]).sum(axis=1)], axis=1)
    denom = np.where(abs_tot > 0, abs_tot, 1.0)
    total_err = (err / denom).max(axis=1)
    z = kr[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = kr[:, 1] / z
        var = np.maximum(kr[:, 2] / z - m1 * m1, 0.0)
        log_norm = top + np.log(z)
    ok = np.isfinite(top) & (z > 0) & (total_err <= rtol)
    return log_norm, center + m1, var, ok
