"""Marginal effects and contrasts computed from posterior draws.

Other predictors sit at representative levels: indicators at 0, standardized
covariates at their mean (0 on the model scale) and count covariates at their
sample mean. Varying intercepts are fixed at 0, i.e. a population-typical
participant working on a population-typical requirement.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .bayes.model import ModelError, ModelSpec

REFERENCE_POLICY = (
    "indicators at 0; standardized covariates at their mean; counts at their mean; "
    "participant and requirement offsets at 0"
)


@dataclass(frozen=True)
class MarginalEffect:
    response: str
    predictor: str
    levels: tuple[float, ...]
    mean: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    count_mean: tuple[float, ...]
    count_ci_low: tuple[float, ...]
    count_ci_high: tuple[float, ...]
    reference_n: float
    credible_level: float = 0.95

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, obj: dict) -> "MarginalEffect":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()})


@dataclass(frozen=True)
class Contrast:
    response: str
    predictor: str
    level_a: float
    level_b: float
    mean: float
    ci_low: float
    ci_high: float
    prob_positive: float
    credible_level: float = 0.95

    def to_json(self) -> dict:
        return asdict(self)


def _coefficients(draws, spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    names = list(draws.names)
    flat = draws.flat()
    alpha = flat[:, names.index("alpha")]
    try:
        beta = np.column_stack([flat[:, names.index(f"beta[{p}]")] for p in spec.predictor_names]) if spec.predictors else np.zeros((len(flat), 0))
    except ValueError as exc:
        raise ModelError(f"draws do not match the model specification: {exc}") from None
    return alpha, beta


def default_levels(spec: ModelSpec, predictor: str) -> list[float]:
    p = spec.predictor(predictor)
    if p.kind == "indicator":
        return [0.0, 1.0]
    return [float(v) for v in np.arange(np.floor(p.observed_min), np.ceil(p.observed_max) + 1)]


def _check_levels(spec: ModelSpec, predictor: str, levels: Sequence[float]) -> None:
    p = spec.predictor(predictor)
    for lv in levels:
        if p.kind == "indicator" and lv not in (0, 1):
            raise ModelError(f"{predictor} is an indicator; level {lv} is not 0 or 1")
        if not p.observed_min <= lv <= p.observed_max:
            raise ModelError(
                f"level {lv} of {predictor} lies outside the observed range "
                f"[{p.observed_min:g}, {p.observed_max:g}]"
            )


def _probabilities(
    draws, spec: ModelSpec, predictor: str, levels: Sequence[float], reference: Mapping[str, float] | None
) -> np.ndarray:
    """Expected proportion per draw and level, shape (n_draws, n_levels)."""
    spec.predictor(predictor)
    _check_levels(spec, predictor, levels)
    alpha, beta = _coefficients(draws, spec)
    reference = dict(reference or {})
    base = np.array([
        p.to_model(reference.get(p.name, p.reference)) for p in spec.predictors
    ], dtype=float)
    idx = spec.predictor_names.index(predictor)
    target = spec.predictor(predictor)
    eta_rest = alpha + beta @ np.where(np.arange(len(base)) == idx, 0.0, base)
    x = target.to_model(np.asarray(levels, dtype=float))
    return expit(eta_rest[:, None] + beta[:, idx][:, None] * x[None, :])


def _interval(x: np.ndarray, level: float, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    tail = 100.0 * (1.0 - level) / 2.0
    return np.percentile(x, tail, axis=axis), np.percentile(x, 100.0 - tail, axis=axis)


def marginal_effect(
    draws,
    spec: ModelSpec,
    predictor: str,
    levels: Sequence[float] | None = None,
    reference: Mapping[str, float] | None = None,
    credible_level: float = 0.95,
) -> MarginalEffect:
    """Posterior mean and equal-tailed interval of the expected missing proportion
    at each level of ``predictor`` (raw units), others at representative levels."""
    levels = list(default_levels(spec, predictor) if levels is None else levels)
    probs = _probabilities(draws, spec, predictor, levels, reference)
    lo, hi = _interval(probs, credible_level)
    mean = probs.mean(axis=0)
    n = spec.reference_n
    return MarginalEffect(
        response=spec.response,
        predictor=predictor,
        levels=tuple(float(v) for v in levels),
        mean=tuple(mean.tolist()),
        ci_low=tuple(lo.tolist()),
        ci_high=tuple(hi.tolist()),
        count_mean=tuple((mean * n).tolist()),
        count_ci_low=tuple((lo * n).tolist()),
        count_ci_high=tuple((hi * n).tolist()),
        reference_n=n,
        credible_level=credible_level,
    )


def contrast(
    draws,
    spec: ModelSpec,
    predictor: str,
    level_a: float,
    level_b: float,
    reference: Mapping[str, float] | None = None,
    credible_level: float = 0.95,
) -> Contrast:
    """Posterior of ``p(level_a) - p(level_b)`` on the proportion scale."""
    probs = _probabilities(draws, spec, predictor, [level_a, level_b], reference)
    diff = probs[:, 0] - probs[:, 1]
    lo, hi = _interval(diff, credible_level)
    return Contrast(
        response=spec.response,
        predictor=predictor,
        level_a=float(level_a),
        level_b=float(level_b),
        mean=float(diff.mean()),
        ci_low=float(lo),
        ci_high=float(hi),
        prob_positive=float(np.mean(diff > 0)),
        credible_level=credible_level,
    )


def intervals_overlap(effect: MarginalEffect, i: int = 0, j: int = 1) -> bool:
    return effect.ci_low[i] <= effect.ci_high[j] and effect.ci_low[j] <= effect.ci_high[i]


def coefficient_summary(draws, credible_level: float = 0.95) -> dict[str, dict[str, float]]:
    """Mean, sd and equal-tailed interval of every non-offset parameter."""
    out = {}
    for name in draws.names:
        if name.startswith("z_"):
            continue
        x = draws.column(name)
        lo, hi = _interval(x, credible_level)
        out[name] = {"mean": float(x.mean()), "sd": float(x.std(ddof=1)), "ci_low": float(lo), "ci_high": float(hi)}
    return out
