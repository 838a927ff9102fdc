"""Heavy-tailed series priors for Bayesian nonparametric inference.

Series priors ``f = sum sigma_k zeta_k phi_k`` with heavy-tailed ``zeta_k``,
their coordinatewise posteriors in Gaussian sequence models, function-space
MCMC for density estimation and classification, and an experiment harness.
"""

__version__ = "0.1.0"

from .exceptions import ConfigError, DomainError, NumericalFailure
from .priors import PriorSpec, ScaleSpec, TailDensity, eval_scale, sample_prior
from .wavelet import CoefficientField, dwt_forward, dwt_inverse

__all__ = [
    "ConfigError", "DomainError", "NumericalFailure",
    "PriorSpec", "ScaleSpec", "TailDensity", "eval_scale", "sample_prior",
    "CoefficientField", "dwt_forward", "dwt_inverse",
]
