"""Draw archives produced by the MCMC samplers."""

from dataclasses import dataclass, field
import math

import numpy as np


@dataclass
class ChainOutput:
    """Post-burn-in, thinned draws plus bookkeeping.

    ``draws`` has shape ``(n_kept, dim)`` (a 1-D chain is stored with
    ``dim == 1``).  ``acceptance`` maps block names to acceptance rates over
    the whole run; ``traces`` holds scalar traces such as hyperparameters or
    the log-posterior.
    """

    draws: np.ndarray
    acceptance: dict = field(default_factory=dict)
    log_posterior: np.ndarray | None = None
    traces: dict = field(default_factory=dict)
    seed: int | None = None
    config: dict = field(default_factory=dict)
    rejected_nonfinite: int = 0

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim == 1:
            self.draws = self.draws[:, None]

    @property
    def n_draws(self):
        return self.draws.shape[0]

    def mean(self):
        return self.draws.mean(axis=0)

    def mcse(self, func=None):
        """Batch-means Monte Carlo standard error of the mean of ``func(draws)``."""
        vals = self.draws if func is None else func(self.draws)
        return batch_means_se(vals)

    def manifest(self):
        return {
            "n_draws": int(self.n_draws),
            "dim": int(self.draws.shape[1]),
            "acceptance": {k: float(v) for k, v in self.acceptance.items()},
            "rejected_nonfinite": int(self.rejected_nonfinite),
            "seed": self.seed,
            "config": self.config,
        }


def batch_means_se(values, n_batches=None):
    """Batch-means standard error along axis 0 (batch count ~ sqrt(n))."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n < 4:
        return np.full(v.shape[1:], math.inf) if v.ndim > 1 else math.inf
    b = n_batches or max(int(math.sqrt(n)), 2)
    size = n // b
    trimmed = v[: size * b]
    means = trimmed.reshape((b, size) + v.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(b)


def effective_sample_size(values):
    """ESS from the batch-means variance ratio."""
    v = np.asarray(values, dtype=float)
    se = batch_means_se(v)
    sd = v.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, (sd / se) ** 2, v.shape[0])
