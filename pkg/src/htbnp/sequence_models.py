"""Ground truths and observations for direct and inverse Gaussian sequence models."""

from dataclasses import dataclass
import math

import numpy as np

from ._random import make_rng
from .exceptions import DomainError
from .wavelet import CoefficientField, dwt_forward, dyadic_levels

DJ94_SIGNALS = ("Blocks", "Bumps", "HeaviSine", "Doppler")
DJ94_LENGTH = 2048
DJ94_COARSE_LEVEL = 5
DJ94_SNR = 7.0

# Test functions of Donoho & Johnstone (1994), Table 1, as implemented in
# WaveLab's MakeSignal.
_JUMP_LOCATIONS = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


def dj94_signal(name, n=DJ94_LENGTH):
    """Sample a Donoho-Johnstone test signal on ``t = (1..n)/n``."""
    t = np.arange(1, n + 1) / n
    if name == "Blocks":
        return (_BLOCK_HEIGHTS * (1 + np.sign(t[:, None] - _JUMP_LOCATIONS)) / 2).sum(axis=1)
    if name == "Bumps":
        return (_BUMP_HEIGHTS * (1 + np.abs((t[:, None] - _JUMP_LOCATIONS) / _BUMP_WIDTHS)) ** -4).sum(axis=1)
    if name == "HeaviSine":
        return 4 * np.sin(4 * math.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)
    if name == "Doppler":
        eps = 0.05
        return np.sqrt(t * (1 - t)) * np.sin(2 * math.pi * (1 + eps) / (t + eps))
    raise DomainError(f"unknown DJ94 signal {name!r}; expected one of {DJ94_SIGNALS}")


@dataclass(frozen=True)
class TruthSpec:
    """Ground truth coefficient recipe.

    kind is one of ``SobolevSin`` (``f_k = k**-1.5 sin k``),
    ``DensityLogTruth`` (``f_lk = 4 cos(k)**3 2**(-5l/2)``), ``DJ94`` (a
    rescaled Donoho-Johnstone signal) or ``Custom`` (given coefficients).
    """

    kind: str = "SobolevSin"
    signal: str = "Blocks"
    target_snr: float = DJ94_SNR
    coefficients: tuple = ()
    wavelet: str = "symmlet8"
    coarse_level: int = DJ94_COARSE_LEVEL
    layout: str = "single"


def volterra_multipliers(K, printed_formula=False):
    """Singular values ``1/((k - 1/2) pi)`` of the Volterra operator, ``k = 1..K``.

    ``printed_formula=True`` returns the reciprocal ``pi/(k - 1/2)`` for
    side-by-side comparisons.
    """
    if int(K) != K or K < 1:
        raise DomainError("K must be a positive integer")
    k = np.arange(1, int(K) + 1)
    out = 1.0 / ((k - 0.5) * math.pi)
    return 1.0 / out if printed_formula else out


def snr_rescale(samples, noise_sd, target_snr):
    """Rescale so that ``||signal|| / (noise_sd sqrt(len)) == target_snr``."""
    x = np.asarray(samples, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise DomainError("cannot rescale an all-zero signal")
    if noise_sd <= 0 or target_snr <= 0:
        raise DomainError("noise_sd and target_snr must be positive")
    return x * (target_snr * noise_sd * math.sqrt(x.size) / norm)


def achieved_snr(samples, noise_sd=1.0):
    x = np.asarray(samples, dtype=float)
    return float(np.linalg.norm(x) / (noise_sd * math.sqrt(x.size)))


def make_truth(spec, truncation):
    """Deterministic truth field.

    ``truncation`` is ``K`` for ``SobolevSin``, the maximal level ``L`` for
    ``DensityLogTruth`` and ``log2`` of the sample count for ``DJ94``.
    """
    if spec.kind == "SobolevSin":
        k = np.arange(1, int(truncation) + 1)
        return CoefficientField(k**-1.5 * np.sin(k), "single")
    if spec.kind == "DensityLogTruth":
        size = 1 << (int(truncation) + 1)
        pos = np.arange(size)
        lev = dyadic_levels(size)
        # level l occupies positions [2**l, 2**(l+1)); position 0 is the
        # constant (scaling) coefficient, set to zero
        within = pos - (1 << lev)
        vals = 4 * np.cos(within) ** 3 * 2.0 ** (-2.5 * lev)
        vals[0] = 0.0
        return CoefficientField(vals, "wavelet", 0)
    if spec.kind == "DJ94":
        n = 1 << int(truncation)
        samples = snr_rescale(dj94_signal(spec.signal, n), 1.0, spec.target_snr)
        return dwt_forward(samples, spec.wavelet, spec.coarse_level)
    if spec.kind == "Custom":
        vals = np.asarray(spec.coefficients, dtype=float)
        coarse = spec.coarse_level if spec.layout == "wavelet" else 0
        return CoefficientField(vals, spec.layout, coarse)
    raise DomainError(f"unknown truth kind {spec.kind!r}")


@dataclass
class SequenceObservation:
    """Observed sequence ``x`` with noise precision ``n``.

    ``forward`` holds the multipliers of an inverse problem; it is ``None``
    for the direct model.
    """

    x: np.ndarray
    n: float
    forward: np.ndarray | None = None
    layout: str = "single"
    coarse_level: int = 0
    seed: int | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if not self.n > 0:
            raise DomainError("noise precision n must be positive")
        if self.forward is not None:
            self.forward = np.asarray(self.forward, dtype=float)
            if self.forward.shape != self.x.shape:
                raise DomainError("forward multipliers must match the observation length")

    @property
    def multipliers(self):
        return np.ones_like(self.x) if self.forward is None else self.forward

    def field(self):
        return CoefficientField(self.x, self.layout, self.coarse_level)


def simulate(truth, n, forward=None, rng_seed=0):
    """Draw ``X = forward * f0 + eps / sqrt(n)`` with standard normal ``eps``."""
    if not n > 0:
        raise DomainError("noise precision n must be positive")
    f0 = truth.values
    kappa = None
    if forward is not None:
        kappa = np.asarray(forward, dtype=float)
        if kappa.shape != f0.shape:
            raise DomainError(f"forward length {kappa.size} does not match truth length {f0.size}")
    rng = make_rng(rng_seed)
    mean = f0 if kappa is None else kappa * f0
    x = mean + rng.standard_normal(f0.shape) / math.sqrt(n)
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return SequenceObservation(x, float(n), kappa, truth.layout, truth.coarse_level, seed)
