"""Hierarchical binomial-logit regression: specification, design and log posterior.

For observation ``i`` of participant ``j`` on requirement ``r``::

    k_i ~ Binomial(n_i, inv_logit(eta_i))
    eta_i = alpha + x_i . beta + sigma_p * z_p[j] + sigma_r * z_r[r]

with ``alpha, beta ~ Normal(0, 1)``, ``z ~ Normal(0, 1)`` (non-centered
varying intercepts) and ``sigma ~ HalfNormal(1)``. The sampler works on
``log sigma``, so the log density carries the matching Jacobian term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, gammaln

from ..causal import AdjustmentSet, Dag, is_backdoor_set, is_direct_effect_set
from ..data import EXPERIENCE_COLUMNS, OUTCOMES, Dataset

PASSIVE = "passive"
MEDIATORS = ("missing_actors", "missing_objects")
GROUPS = ("participant", "requirement")
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    cls: str  # "intercept" | "slope" | "group_sd"
    distribution: str  # "normal" | "half_normal"
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ModelError("prior sigma must be positive")


DEFAULT_PRIORS = {
    "intercept": PriorSpec("intercept", "normal", 0.0, 1.0),
    "slope": PriorSpec("slope", "normal", 0.0, 1.0),
    "group_sd": PriorSpec("group_sd", "half_normal", 0.0, 1.0),
}


@dataclass(frozen=True)
class Predictor:
    """A fixed-effect column. ``kind`` is ``indicator``, ``standardized`` or ``count``.

    Model-scale value is ``(raw - center) / scale``; ``center`` and ``scale``
    are 0 and 1 except for standardized covariates.
    """

    name: str
    kind: str
    center: float = 0.0
    scale: float = 1.0
    mean: float = 0.0
    observed_min: float = 0.0
    observed_max: float = 1.0

    def to_model(self, raw) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.center) / self.scale

    @property
    def reference(self) -> float:
        """Representative raw level: 0 for indicators, the sample mean otherwise."""
        return 0.0 if self.kind == "indicator" else self.mean


@dataclass(frozen=True)
class ModelSpec:
    response: str
    predictors: tuple[Predictor, ...]
    varying: tuple[str, ...] = GROUPS
    priors: dict = field(default_factory=lambda: dict(DEFAULT_PRIORS), compare=False)
    link: str = "logit"
    reference_n: float = 1.0  # median requirement denominator, for count-scale summaries

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.predictors)

    def predictor(self, name: str) -> Predictor:
        for p in self.predictors:
            if p.name == name:
                return p
        raise ModelError(f"predictor {name!r} not in model for {self.response}")

    def to_json(self) -> dict:
        return {
            "response": self.response,
            "link": self.link,
            "reference_n": self.reference_n,
            "varying": list(self.varying),
            "predictors": [vars(p) for p in self.predictors],
            "priors": {k: vars(v) for k, v in self.priors.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpec":
        return cls(
            response=obj["response"],
            predictors=tuple(Predictor(**p) for p in obj["predictors"]),
            varying=tuple(obj["varying"]),
            priors={k: PriorSpec(**v) for k, v in obj["priors"].items()},
            link=obj.get("link", "logit"),
            reference_n=obj.get("reference_n", 1.0),
        )


def _raw_column(d: Dataset, name: str) -> np.ndarray:
    if name in MEDIATORS:
        return np.array([o.missing(name.removeprefix("missing_")) for o in d.observations], dtype=float)
    pidx = {p.id: p for p in d.participants}
    return np.array([pidx[o.participant_id].covariate(name) for o in d.observations], dtype=float)


def _make_predictor(d: Dataset, name: str) -> Predictor:
    raw = _raw_column(d, name)
    lo, hi, mean = float(raw.min()), float(raw.max()), float(raw.mean())
    if name == PASSIVE:
        return Predictor(name, "indicator", 0.0, 1.0, mean, 0.0, 1.0)
    if name in MEDIATORS:
        return Predictor(name, "count", 0.0, 1.0, mean, lo, hi)
    sd = float(raw.std())
    return Predictor(name, "standardized", mean, sd if sd > 0 else 1.0, mean, lo, hi)


_COVARIATES = {"age_group", "program", *EXPERIENCE_COLUMNS}


def build_model(
    d: Dataset,
    response: str,
    adjustment: AdjustmentSet | Iterable[str] = (),
    include_mediators: bool = False,
    dag: Dag | None = None,
    varying: Sequence[str] = GROUPS,
) -> ModelSpec:
    """Assemble the regression for one response variable.

    ``adjustment`` lists DAG covariate names. Mediators (the other two missing
    counts) may only enter the associations model and only with
    ``include_mediators``. If ``dag`` is given, the resulting covariate set is
    checked against the backdoor criterion (or the direct-effect criterion when
    mediators are present).
    """
    if response not in OUTCOMES:
        raise ModelError(f"unknown response {response!r}")
    names = list(adjustment.variables if isinstance(adjustment, AdjustmentSet) else adjustment)
    covs = []
    for v in names:
        if v in MEDIATORS:
            if response != "associations":
                raise ModelError(f"{v} cannot adjust the {response} model (it is a sibling outcome)")
            continue
        if v == f"missing_{response}" or v not in _COVARIATES:
            raise ModelError(f"adjustment variable {v!r} is not a usable covariate for {response}")
        covs.append(v)
    covs = sorted(set(covs))
    mediators = list(MEDIATORS) if include_mediators and response == "associations" else []

    if dag is not None:
        outcome_node = f"missing_{response}"
        z = set(covs) | set(mediators)
        ok = (
            is_direct_effect_set(dag, dag.exposure, outcome_node, z)
            if mediators
            else is_backdoor_set(dag, dag.exposure, outcome_node, z)
        )
        if not ok:
            raise ModelError(f"adjustment set {sorted(z)} is invalid for {response}")
    for g in varying:
        if g not in GROUPS:
            raise ModelError(f"unknown grouping {g!r}")

    preds = tuple(_make_predictor(d, n) for n in [PASSIVE, *covs, *mediators])
    ref_n = float(np.median([r.expected(response) for r in d.requirements]))
    return ModelSpec(response, preds, tuple(varying), reference_n=ref_n)


# -------------------------------------------------------------------- design


@dataclass(frozen=True)
class ParameterLayout:
    n_slopes: int
    group_sizes: tuple[int, ...]

    @property
    def dim(self) -> int:
        return 1 + self.n_slopes + sum(self.group_sizes) + len(self.group_sizes)

    @property
    def beta(self) -> slice:
        return slice(1, 1 + self.n_slopes)

    def z(self, g: int) -> slice:
        start = 1 + self.n_slopes + sum(self.group_sizes[:g])
        return slice(start, start + self.group_sizes[g])

    def log_sigma(self, g: int) -> int:
        return 1 + self.n_slopes + sum(self.group_sizes) + g


class GlmmModel:
    """A ModelSpec bound to data: design matrix, counts and group indices.

    Exposes ``log_prob(q)`` and ``log_prob_and_grad(q)`` on the unconstrained
    parameter vector ``[alpha, beta, z_1, z_2, log_sigma_1, log_sigma_2]``.
    """

    def __init__(
        self,
        spec: ModelSpec,
        X: np.ndarray,
        k: np.ndarray,
        n: np.ndarray,
        group_index: Sequence[np.ndarray],
        group_labels: Sequence[Sequence[str]],
        likelihood: bool = True,
    ):
        self.spec = spec
        self.X = np.asarray(X, dtype=float).reshape(len(k), len(spec.predictors))
        self.k = np.asarray(k, dtype=float)
        self.n = np.asarray(n, dtype=float)
        if np.any(self.k < 0) or np.any(self.k > self.n):
            raise ModelError("counts must satisfy 0 <= k <= n")
        self.group_index = [np.asarray(g, dtype=int) for g in group_index]
        self.group_labels = [tuple(str(s) for s in lab) for lab in group_labels]
        self.layout = ParameterLayout(len(spec.predictors), tuple(len(lab) for lab in self.group_labels))
        self.likelihood = likelihood
        self._log_binom = float(np.sum(gammaln(self.n + 1) - gammaln(self.k + 1) - gammaln(self.n - self.k + 1)))
        self._prior_i = spec.priors["intercept"]
        self._prior_b = spec.priors["slope"]
        self._prior_s = spec.priors["group_sd"]

    @classmethod
    def from_dataset(cls, spec: ModelSpec, d: Dataset, likelihood: bool = True) -> "GlmmModel":
        outcome = spec.response
        req = {r.id: r for r in d.requirements}
        k = np.array([o.missing(outcome) for o in d.observations], dtype=float)
        n = np.array([req[o.requirement_id].expected(outcome) for o in d.observations], dtype=float)
        X = np.column_stack([p.to_model(_raw_column(d, p.name)) for p in spec.predictors]) if spec.predictors else np.zeros((len(k), 0))
        idx, labels = [], []
        for g in spec.varying:
            ids = d.participant_ids if g == "participant" else d.requirement_ids
            pos = {v: i for i, v in enumerate(ids)}
            attr = "participant_id" if g == "participant" else "requirement_id"
            idx.append(np.array([pos[getattr(o, attr)] for o in d.observations]))
            labels.append(ids)
        return cls(spec, X, k, n, idx, labels, likelihood)

    def prior_only(self) -> "GlmmModel":
        return GlmmModel(self.spec, self.X, self.k, self.n, self.group_index, self.group_labels, likelihood=False)

    # -- naming

    @property
    def dim(self) -> int:
        return self.layout.dim

    def parameter_names(self, constrained: bool = True) -> list[str]:
        names = ["alpha"] + [f"beta[{p}]" for p in self.spec.predictor_names]
        for g, labels in zip(self.spec.varying, self.group_labels):
            names += [f"z_{g}[{lab}]" for lab in labels]
        prefix = "sigma_" if constrained else "log_sigma_"
        names += [prefix + g for g in self.spec.varying]
        return names

    def constrain(self, q: np.ndarray) -> np.ndarray:
        """Map unconstrained draws (..., dim) to the reported scale (sigma, not log sigma)."""
        out = np.array(q, dtype=float, copy=True)
        for g in range(len(self.group_labels)):
            out[..., self.layout.log_sigma(g)] = np.exp(out[..., self.layout.log_sigma(g)])
        return out

    def unconstrain(self, theta: np.ndarray) -> np.ndarray:
        out = np.array(theta, dtype=float, copy=True)
        for g in range(len(self.group_labels)):
            out[..., self.layout.log_sigma(g)] = np.log(out[..., self.layout.log_sigma(g)])
        return out

    # -- density

    def linear_predictor(self, q: np.ndarray) -> np.ndarray:
        lay = self.layout
        eta = q[0] + self.X @ q[lay.beta]
        for g, idx in enumerate(self.group_index):
            eta = eta + math.exp(q[lay.log_sigma(g)]) * q[lay.z(g)][idx]
        return eta

    def log_likelihood(self, q: np.ndarray) -> float:
        eta = self.linear_predictor(np.asarray(q, dtype=float))
        return float(self._log_binom + np.sum(self.k * eta - self.n * np.logaddexp(0.0, eta)))

    def _check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise ModelError(f"parameter vector has shape {q.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(q)):
            raise ModelError("parameter vector contains non-finite values")
        return q

    def log_prob(self, q) -> float:
        return self.log_prob_and_grad(q)[0]

    def log_prob_and_grad(self, q) -> tuple[float, np.ndarray]:
        q = self._check(q)
        lay = self.layout
        grad = np.zeros_like(q)
        lp = 0.0

        pi, pb, ps = self._prior_i, self._prior_b, self._prior_s
        a = (q[0] - pi.mu) / pi.sigma
        lp += -0.5 * a * a - math.log(pi.sigma) - _LOG_SQRT_2PI
        grad[0] -= a / pi.sigma
        b = (q[lay.beta] - pb.mu) / pb.sigma
        lp += float(-0.5 * b @ b) - b.size * (math.log(pb.sigma) + _LOG_SQRT_2PI)
        grad[lay.beta] -= b / pb.sigma

        sigmas = []
        for g in range(len(self.group_index)):
            z = q[lay.z(g)]
            lp += float(-0.5 * z @ z) - z.size * _LOG_SQRT_2PI
            grad[lay.z(g)] -= z
            t = q[lay.log_sigma(g)]
            if t > 300.0:
                return -math.inf, grad
            s = math.exp(t)
            sigmas.append(s)
            # half-normal on sigma plus log-Jacobian t of sigma = exp(t)
            u = s / ps.sigma
            lp += math.log(2.0) - math.log(ps.sigma) - _LOG_SQRT_2PI - 0.5 * u * u + t
            grad[lay.log_sigma(g)] += -u * u + 1.0

        if self.likelihood:
            eta = q[0] + self.X @ q[lay.beta]
            for g, idx in enumerate(self.group_index):
                eta = eta + sigmas[g] * q[lay.z(g)][idx]
            lp += self._log_binom + float(np.sum(self.k * eta - self.n * np.logaddexp(0.0, eta)))
            resid = self.k - self.n * expit(eta)
            grad[0] += resid.sum()
            grad[lay.beta] += self.X.T @ resid
            for g, idx in enumerate(self.group_index):
                per_group = np.bincount(idx, weights=resid, minlength=lay.group_sizes[g])
                z = q[lay.z(g)]
                grad[lay.z(g)] += sigmas[g] * per_group
                grad[lay.log_sigma(g)] += sigmas[g] * float(per_group @ z)
        if not math.isfinite(lp):
            lp = -math.inf
        return lp, grad

    # -- simulation

    def draw_prior(self, rng: np.random.Generator) -> np.ndarray:
        """One unconstrained parameter vector drawn from the prior."""
        lay = self.layout
        q = np.empty(self.dim)
        q[0] = rng.normal(self._prior_i.mu, self._prior_i.sigma)
        q[lay.beta] = rng.normal(self._prior_b.mu, self._prior_b.sigma, lay.n_slopes)
        for g in range(len(self.group_index)):
            q[lay.z(g)] = rng.standard_normal(lay.group_sizes[g])
        for g in range(len(self.group_index)):
            q[lay.log_sigma(g)] = math.log(abs(rng.normal(0.0, self._prior_s.sigma)) + 1e-300)
        return q

    def simulate(self, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Replicate response counts given unconstrained parameters ``q``."""
        p = expit(self.linear_predictor(np.asarray(q, dtype=float)))
        return rng.binomial(self.n.astype(np.int64), p)


def log_posterior(spec: ModelSpec, d: Dataset, theta) -> tuple[float, np.ndarray]:
    """Log joint density and its gradient at unconstrained ``theta``."""
    return GlmmModel.from_dataset(spec, d).log_prob_and_grad(theta)
