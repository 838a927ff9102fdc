"""Periodized orthonormal discrete wavelet transform on [0, 1].

Coefficient vectors use the flat dyadic ordering: for a signal of length
``2**J`` analysed down to ``coarse_level`` j0, entries ``[0, 2**j0)`` hold
the scaling coefficients and entries ``[2**l, 2**(l+1))`` hold the detail
coefficients of level ``l`` for ``j0 <= l < J``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

FINE_LEVEL = 12

# Least-asymmetric Daubechies filter with 8 vanishing moments, in the
# ordering used by WaveLab's MakeONFilter('Symmlet', 8).
_SYMMLET8 = (
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.05194583810770904,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
)

# Extremal-phase Daubechies filter with 8 vanishing moments (16 taps).
_DAUBECHIES8 = (
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
)

_HAAR = (2**-0.5, 2**-0.5)

_FILTERS = {"haar": _HAAR, "symmlet8": _SYMMLET8, "daubechies8": _DAUBECHIES8}


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal two-channel filter pair derived from a lowpass filter."""

    name: str
    lowpass: np.ndarray = field(repr=False)

    @classmethod
    def named(cls, name):
        key = str(name).lower().replace("-", "").replace("_", "")
        if key not in _FILTERS:
            raise DomainError(f"unknown wavelet filter {name!r}; expected one of {sorted(_FILTERS)}")
        return cls(key, np.array(_FILTERS[key], dtype=float))

    @property
    def highpass(self):
        h = self.lowpass
        return ((-1.0) ** np.arange(h.size)) * h[::-1]

    def __len__(self):
        return self.lowpass.size


def as_filter(wavelet):
    if isinstance(wavelet, WaveletFilter):
        return wavelet
    return WaveletFilter.named(wavelet)


def _log2_exact(n):
    j = int(n).bit_length() - 1
    if n < 1 or (1 << j) != n:
        raise DomainError(f"length must be a power of two, got {n}")
    return j


@dataclass
class CoefficientField:
    """Coefficients of a function in a single-index or wavelet basis.

    ``values`` is the flat coefficient vector.  For ``layout == "single"``
    entry ``k - 1`` holds ``f_k``.  For ``layout == "wavelet"`` the flat
    dyadic ordering described in the module docstring is used and the
    length must be a power of two.
    """

    values: np.ndarray
    layout: str = "single"
    coarse_level: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.layout not in ("single", "wavelet"):
            raise DomainError(f"unknown layout {self.layout!r}")
        if self.layout == "wavelet":
            J = _log2_exact(self.values.shape[-1])
            if not 0 <= self.coarse_level <= J:
                raise DomainError(f"coarse_level {self.coarse_level} incompatible with length 2**{J}")

    @property
    def size(self):
        return self.values.shape[-1]

    @property
    def max_level(self):
        """Finest detail level present (wavelet layout)."""
        return _log2_exact(self.size) - 1

    def scaling(self):
        return self.values[..., : 1 << self.coarse_level]

    def level(self, l):
        if self.layout != "wavelet":
            raise DomainError("level access requires the wavelet layout")
        if not self.coarse_level <= l <= self.max_level:
            raise DomainError(f"level {l} outside [{self.coarse_level}, {self.max_level}]")
        return self.values[..., 1 << l : 2 << l]

    def level_labels(self):
        """Per-entry level label; scaling entries get ``coarse_level - 1``."""
        if self.layout == "single":
            return np.zeros(self.size, dtype=int)
        labels = dyadic_levels(self.size)
        labels[: 1 << self.coarse_level] = self.coarse_level - 1
        return labels

    def index_labels(self):
        """Within-level index (wavelet) or 1-based index ``k`` (single)."""
        pos = np.arange(self.size)
        if self.layout == "single":
            return pos + 1
        lv = dyadic_levels(self.size)
        within = pos - np.where(pos == 0, 0, 1 << lv)
        return np.where(pos < (1 << self.coarse_level), pos, within)

    def copy(self, values=None):
        return CoefficientField(
            self.values.copy() if values is None else np.asarray(values, dtype=float),
            self.layout,
            self.coarse_level,
        )


def dyadic_levels(size):
    """Level ``floor(log2(i))`` of each flat position ``i`` (position 0 gets 0)."""
    pos = np.arange(size)
    out = np.zeros(size, dtype=int)
    nz = pos > 0
    out[nz] = np.floor(np.log2(pos[nz]) + 1e-12).astype(int)
    return out


def _analysis_step(x, h, g):
    n = x.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    blocks = x[..., idx]
    return blocks @ h, blocks @ g


def _synthesis_step(a, d, h, g):
    # transpose of _analysis_step: out[2j + e] = sum_i a[j - i] h[2i + e] + d[j - i] g[2i + e]
    half = a.shape[-1]
    taps = h.size // 2
    idx = (np.arange(half)[:, None] - np.arange(taps)[None, :]) % half
    ab = a[..., idx]
    db = d[..., idx]
    out = np.empty(a.shape[:-1] + (2 * half,))
    out[..., 0::2] = ab @ h[0::2] + db @ g[0::2]
    out[..., 1::2] = ab @ h[1::2] + db @ g[1::2]
    return out


def dwt_forward(samples, wavelet="symmlet8", coarse_level=0):
    """Periodized orthonormal analysis of ``samples`` (length ``2**J``).

    Works on the last axis, so a batch of signals can be passed as a 2-D array.
    """
    x = np.asarray(samples, dtype=float)
    J = _log2_exact(x.shape[-1])
    if not 0 <= coarse_level < J and not (J == 0 and coarse_level == 0):
        raise DomainError(f"coarse_level must lie in [0, {J}), got {coarse_level}")
    filt = as_filter(wavelet)
    h, g = filt.lowpass, filt.highpass
    out = np.empty_like(x)
    a = x
    for j in range(J - 1, coarse_level - 1, -1):
        a, d = _analysis_step(a, h, g)
        out[..., 1 << j : 2 << j] = d
    out[..., : 1 << coarse_level] = a
    return CoefficientField(out, "wavelet", coarse_level)


def dwt_inverse(coeffs, wavelet="symmlet8"):
    """Inverse of :func:`dwt_forward`."""
    if not isinstance(coeffs, CoefficientField):
        raise DomainError("dwt_inverse expects a CoefficientField")
    if coeffs.layout != "wavelet":
        raise DomainError("dwt_inverse requires the wavelet layout")
    filt = as_filter(wavelet)
    h, g = filt.lowpass, filt.highpass
    c = coeffs.values
    J = _log2_exact(c.shape[-1])
    a = c[..., : 1 << coeffs.coarse_level]
    for j in range(coeffs.coarse_level, J):
        a = _synthesis_step(a, c[..., 1 << j : 2 << j], h, g)
    return a


def pad_to_level(coeffs, level):
    """Embed a wavelet field into a finer one by zero-filling the missing levels."""
    J = _log2_exact(coeffs.size)
    if level < J:
        raise DomainError(f"cannot pad a field of 2**{J} coefficients down to 2**{level}")
    vals = np.zeros(coeffs.values.shape[:-1] + (1 << level,))
    vals[..., : coeffs.size] = coeffs.values
    return CoefficientField(vals, "wavelet", coeffs.coarse_level)


def synthesize_function(coeffs, wavelet="symmlet8", fine_level=FINE_LEVEL):
    """Values of ``sum c_lk psi_lk`` on the grid ``i / 2**fine_level``.

    Coefficients are read as L2[0, 1] coefficients, so the discrete synthesis
    is multiplied by ``2**(fine_level / 2)``.
    """
    padded = pad_to_level(coeffs, fine_level)
    return dwt_inverse(padded, wavelet) * 2.0 ** (fine_level / 2)


def analyze_function(values, wavelet="symmlet8", coarse_level=0, level=None):
    """Adjoint of :func:`synthesize_function`, truncated to ``2**(level+1)`` coefficients.

    Maps a vector ``v`` on the fine grid to ``<v, d synth / d c>``; used for
    gradients.
    """
    vals = np.asarray(values, dtype=float)
    fine = _log2_exact(vals.shape[-1])
    full = dwt_forward(vals, wavelet, coarse_level).values * 2.0 ** (fine / 2)
    size = full.shape[-1] if level is None else 1 << (level + 1)
    return CoefficientField(full[..., :size], "wavelet", coarse_level)


def grid_indices(points, fine_level=FINE_LEVEL):
    """Nearest fine-grid index for points in [0, 1] (1 wraps to 0)."""
    t = np.asarray(points, dtype=float)
    if t.size and (not np.all(np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0):
        raise DomainError("evaluation points must lie in [0, 1]")
    n = 1 << fine_level
    return np.rint(t * n).astype(np.int64) % n


def eval_function(coeffs, grid, wavelet="symmlet8", fine_level=FINE_LEVEL):
    """Evaluate the expansion at ``grid`` by nearest-point lookup on the fine grid."""
    idx = grid_indices(grid, fine_level)
    return synthesize_function(coeffs, wavelet, fine_level)[..., idx]
