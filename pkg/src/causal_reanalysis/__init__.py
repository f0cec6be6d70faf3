"""Causal and Bayesian reanalysis of the passive-voice domain-modeling experiment."""

__version__ = "0.1.0"
