"""Bayesian hierarchical binomial regression fitted with HMC."""

from .diagnostics import Diagnostics, compute_diagnostics
from .hmc import PosteriorDraws, SamplerError, SamplerSettings, hmc_sample
from .model import GlmmModel, ModelError, ModelSpec, PriorSpec, build_model, log_posterior
from .predictive import posterior_predictive, prior_predictive

__all__ = [
    "Diagnostics",
    "GlmmModel",
    "ModelError",
    "ModelSpec",
    "PosteriorDraws",
    "PriorSpec",
    "SamplerError",
    "SamplerSettings",
    "build_model",
    "compute_diagnostics",
    "hmc_sample",
    "log_posterior",
    "posterior_predictive",
    "prior_predictive",
]
