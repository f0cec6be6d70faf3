"""Prior and posterior predictive simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GlmmModel

STATISTICS = ("mean", "sd", "max")


def _stat(name: str, k: np.ndarray) -> np.ndarray:
    if name == "mean":
        return k.mean(axis=-1)
    if name == "sd":
        return k.std(axis=-1)
    if name == "max":
        return k.max(axis=-1)
    raise ValueError(f"unknown statistic {name!r}")


def exceedance_fraction(observed: float, replicated: np.ndarray) -> float:
    """Share of replicates whose statistic exceeds ``observed``; ties count half."""
    replicated = np.asarray(replicated, dtype=float)
    return float(np.mean(replicated > observed) + 0.5 * np.mean(replicated == observed))


@dataclass
class PriorPredictive:
    simulations: np.ndarray  # (n_sims, n_obs)
    denominators: np.ndarray

    def summary(self) -> dict:
        k, n = self.simulations, self.denominators
        total_n = n.sum()
        prop = k.sum(axis=1) / total_n if total_n > 0 else np.zeros(len(k))
        has_n = n > 0
        return {
            "n_sims": int(len(k)),
            "within_support": bool(np.all((k >= 0) & (k <= n))),
            "mean_proportion": float(prop.mean()),
            "proportion_quantiles": {q: float(np.quantile(prop, float(q))) for q in ("0.05", "0.5", "0.95")},
            "share_zero": float(np.mean(k[:, has_n] == 0)) if has_n.any() else 1.0,
            "share_full": float(np.mean(k[:, has_n] == n[has_n])) if has_n.any() else 0.0,
            "min_count": int(k.min()),
            "max_count": int(k.max()),
            "max_denominator": int(n.max()),
        }


def prior_predictive(model: GlmmModel, n_sims: int = 1000, seed: int = 0) -> PriorPredictive:
    """Simulate response counts with parameters drawn from the priors."""
    if n_sims < 1:
        raise ValueError("n_sims must be at least 1")
    rng = np.random.default_rng(seed)
    sims = np.empty((n_sims, len(model.k)), dtype=np.int64)
    for s in range(n_sims):
        sims[s] = model.simulate(model.draw_prior(rng), rng)
    return PriorPredictive(sims, model.n.astype(np.int64))


@dataclass
class PosteriorPredictive:
    replicates: np.ndarray  # (n_draws, n_obs)
    observed: np.ndarray

    def checks(self) -> dict:
        out = {}
        for name in STATISTICS:
            obs = float(_stat(name, self.observed))
            rep = _stat(name, self.replicates.astype(float))
            out[name] = {
                "observed": obs,
                "replicated_mean": float(rep.mean()),
                "replicated_interval": [float(np.quantile(rep, 0.025)), float(np.quantile(rep, 0.975))],
                "fraction_exceeding": exceedance_fraction(obs, rep),
            }
        return out


def posterior_predictive(model: GlmmModel, draws, seed: int = 0, max_draws: int | None = None) -> PosteriorPredictive:
    """One replicated dataset per retained posterior draw.

    ``draws`` is a PosteriorDraws (constrained scale); with ``max_draws`` the
    draws are thinned evenly.
    """
    flat = draws.flat()
    if len(flat) == 0:
        raise ValueError("no posterior draws")
    if max_draws is not None and max_draws < len(flat):
        flat = flat[np.linspace(0, len(flat) - 1, max_draws).round().astype(int)]
    rng = np.random.default_rng(seed)
    q = model.unconstrain(flat)
    reps = np.empty((len(q), len(model.k)), dtype=np.int64)
    for i, qi in enumerate(q):
        reps[i] = model.simulate(qi, rng)
    return PosteriorPredictive(reps, model.k.astype(np.int64))
