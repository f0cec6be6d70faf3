"""Convergence diagnostics: rank-normalized split R-hat and bulk/tail ESS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

# reported in place of an infinite R-hat (chains stuck at different constants)
RHAT_CAP = 1.0e6


@dataclass
class Diagnostics:
    names: list[str]
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray
    divergences: int = 0
    accept_rate: float = float("nan")
    step_sizes: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "divergences": int(self.divergences),
            "accept_rate": float(self.accept_rate),
            "step_sizes": [float(s) for s in self.step_sizes],
            "max_rhat": float(np.max(self.rhat)) if len(self.rhat) else None,
            "min_ess_bulk": float(np.min(self.ess_bulk)) if len(self.ess_bulk) else None,
            "parameters": {
                n: {"rhat": float(r), "ess_bulk": float(b), "ess_tail": float(t)}
                for n, r, b, t in zip(self.names, self.rhat, self.ess_bulk, self.ess_tail)
            },
        }


def _split(x: np.ndarray) -> np.ndarray:
    """(chains, draws) -> (2*chains, draws//2), dropping a middle draw if odd."""
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, x.shape[1] - n:]], axis=0)


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((r - 0.375) / (x.size + 0.25))


def _rhat_basic(x: np.ndarray) -> float:
    m, n = x.shape
    chain_var = x.var(axis=1, ddof=1)
    w = chain_var.mean()
    b = n * x.mean(axis=1).var(ddof=1)
    if w <= 0:
        return 1.0 if b <= 0 else RHAT_CAP
    var_plus = (n - 1) / n * w + b / n
    return float(min(np.sqrt(var_plus / w), RHAT_CAP))


def split_rhat(x: np.ndarray) -> float:
    """Rank-normalized split R-hat: the larger of the bulk and folded versions.

    ``x`` has shape (chains, draws); at least two chains are required.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("R-hat needs at least two chains")
    if x.shape[1] < 4:
        raise ValueError("R-hat needs at least four draws per chain")
    s = _split(x)
    bulk = _rhat_basic(_rank_normalize(s))
    folded = np.abs(s - np.median(s))
    tail = _rhat_basic(_rank_normalize(folded))
    return max(bulk, tail)


def _autocov(x: np.ndarray) -> np.ndarray:
    """Per-chain autocovariance via FFT; x has shape (chains, draws)."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), size, axis=1)[:, :n]
    return acov / n


def _ess(x: np.ndarray) -> float:
    """ESS with Geyer's initial monotone positive sequence, pooled over chains."""
    m, n = x.shape
    if n < 4:
        return float("nan")
    acov = _autocov(x)
    chain_mean = x.mean(axis=1)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += chain_mean.var(ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # pair sums, truncated at the first negative pair and made monotone
    t = 0
    pair_sums = []
    while t + 1 < n:
        s = rho[t] + rho[t + 1]
        if s < 0:
            break
        pair_sums.append(s)
        t += 2
    pairs = np.minimum.accumulate(np.array(pair_sums)) if pair_sums else np.array([1.0])
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def ess_bulk(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return _ess(_rank_normalize(_split(x)))


def ess_tail(x: np.ndarray) -> float:
    """Minimum of the ESS of the 5% and 95% quantile indicators."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    s = _split(x)
    lo, hi = np.quantile(s, [0.05, 0.95])
    return min(_ess(_rank_normalize((s <= lo).astype(float))), _ess(_rank_normalize((s <= hi).astype(float))))


def ess_mean(x: np.ndarray) -> float:
    """ESS for estimating the mean (no rank normalization), used for MCSE."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return _ess(_split(x))


def mcse_mean(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(ess_mean(x)))


def mcse_sd(x: np.ndarray) -> float:
    """Monte-Carlo standard error of the sd, by the delta method on E[(x - mean)^2]."""
    x = np.asarray(x, dtype=float)
    sd = np.std(x, ddof=1)
    sq = (x - x.mean()) ** 2
    se_var = np.std(sq, ddof=1) / np.sqrt(ess_mean(sq))
    return float(se_var / (2.0 * sd))


def compute_diagnostics(draws, names: list[str] | None = None) -> Diagnostics:
    """Per-parameter R-hat and ESS for ``draws`` of shape (chains, draws, params).

    Also accepts a PosteriorDraws object, whose sampler statistics are carried over.
    """
    divergences, accept, steps = 0, float("nan"), []
    if hasattr(draws, "values"):
        names = list(draws.names)
        divergences = int(draws.divergent.sum())
        accept = float(draws.accept_stat.mean())
        steps = list(draws.step_sizes)
        arr = draws.values
    else:
        arr = np.asarray(draws, dtype=float)
    if arr.ndim != 3:
        raise ValueError("draws must have shape (chains, draws, params)")
    if arr.shape[0] < 2:
        raise ValueError("R-hat is undefined for a single chain")
    names = names or [f"p{i}" for i in range(arr.shape[2])]
    rhat = np.array([split_rhat(arr[:, :, i]) for i in range(arr.shape[2])])
    bulk = np.array([ess_bulk(arr[:, :, i]) for i in range(arr.shape[2])])
    tail = np.array([ess_tail(arr[:, :, i]) for i in range(arr.shape[2])])
    return Diagnostics(names, rhat, bulk, tail, divergences, accept, steps)
