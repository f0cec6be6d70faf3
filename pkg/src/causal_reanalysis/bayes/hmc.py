"""Static-trajectory Hamiltonian Monte Carlo with windowed warmup adaptation.

Each transition draws a momentum, integrates ``L`` leapfrog steps with ``L``
uniform on ``1..L_max`` (jittering breaks periodic orbits) and accepts with
the Metropolis probability of the energy change. Warmup tunes the step size by
dual averaging towards a target acceptance and estimates a diagonal inverse
mass matrix in doubling windows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import Diagnostics, compute_diagnostics

MAX_ENERGY_ERROR = 1000.0
INIT_RETRIES = 100


class SamplerError(RuntimeError):
    """Numerical failure: no finite initial point, or warmup diverged throughout."""


@dataclass(frozen=True)
class SamplerSettings:
    chains: int = 4
    warmup: int = 1000
    samples: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    path_length: float = 4.0  # mean integration time is about half this
    max_steps: int = 256
    init_radius: float = 2.0
    cores: int = 1

    def validate(self) -> None:
        if self.chains < 2:
            raise ValueError("at least two chains are required")
        if self.warmup < 100 or self.samples < 100:
            raise ValueError("warmup and samples must each be at least 100")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")


@dataclass
class PosteriorDraws:
    """Post-warmup draws on the reported (constrained) scale.

    ``values`` has shape (chains, draws, params).
    """

    names: list[str]
    values: np.ndarray
    settings: SamplerSettings
    accept_stat: np.ndarray = field(default=None)
    divergent: np.ndarray = field(default=None)
    n_steps: np.ndarray = field(default=None)
    step_sizes: list[float] = field(default_factory=list)
    inv_metric: list[list[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.accept_stat is None:
            self.accept_stat = np.ones(self.values.shape[:2])
        if self.divergent is None:
            self.divergent = np.zeros(self.values.shape[:2], dtype=bool)
        if self.n_steps is None:
            self.n_steps = np.zeros(self.values.shape[:2], dtype=int)
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")

    @property
    def n_chains(self) -> int:
        return self.values.shape[0]

    @property
    def n_draws(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        """All draws of one parameter, flattened chain-major."""
        return self.values[:, :, self.names.index(name)].reshape(-1)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.values.shape[2])


# ------------------------------------------------------------------- leapfrog


def leapfrog(log_prob_and_grad, q, p, grad, eps, n_steps, inv_metric):
    """Integrate ``n_steps`` leapfrog steps; returns (q, p, log_prob, grad)."""
    q = q.copy()
    p = p + 0.5 * eps * grad
    lp = -math.inf
    for i in range(n_steps):
        q = q + eps * inv_metric * p
        lp, grad = log_prob_and_grad(q)
        if not math.isfinite(lp):
            return q, p, -math.inf, grad
        if i < n_steps - 1:
            p = p + eps * grad
    p = p + 0.5 * eps * grad
    return q, p, lp, grad


def hamiltonian(lp: float, p: np.ndarray, inv_metric: np.ndarray) -> float:
    with np.errstate(over="ignore"):  # divergent trajectories overflow to inf
        return -lp + 0.5 * float(p @ (inv_metric * p))


# --------------------------------------------------------------- adaptation


class DualAveraging:
    """Nesterov dual averaging of log step size (gamma 0.05, t0 10, kappa 0.75)."""

    def __init__(self, eps: float, target: float):
        self.target = target
        self.restart(eps)

    def restart(self, eps: float) -> None:
        self.mu = math.log(10.0 * eps)
        self.t = 0
        self.h_bar = 0.0
        self.log_eps = math.log(eps)
        self.log_eps_bar = 0.0

    def update(self, accept: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + 10.0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept)
        self.log_eps = self.mu - math.sqrt(self.t) / 0.05 * self.h_bar
        w = self.t ** -0.75
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final(self) -> float:
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup: int) -> tuple[int, list[int]]:
    """Start of the first metric-adaptation window and the iterations at which
    each window closes.

    Layout: initial fast buffer, slow windows doubling from 25, final fast
    buffer (75 / 25 / 50, shrunk proportionally for short warmups).
    """
    init, term, base = 75, 50, 25
    if init + term + base > n_warmup:
        init, term = int(0.15 * n_warmup), int(0.1 * n_warmup)
        base = n_warmup - init - term
    ends = []
    start, size = init, base
    last = n_warmup - term
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start, size = end, size * 2
    return init, ends


def _find_initial_eps(log_prob_and_grad, q, lp, grad, inv_metric, rng) -> float:
    eps = 1.0
    p = rng.standard_normal(q.size) / np.sqrt(inv_metric)
    h0 = hamiltonian(lp, p, inv_metric)
    _, p1, lp1, _ = leapfrog(log_prob_and_grad, q, p, grad, eps, 1, inv_metric)
    delta = h0 - hamiltonian(lp1, p1, inv_metric) if math.isfinite(lp1) else -math.inf
    direction = 1 if delta > math.log(0.8) else -1
    for _ in range(100):
        _, p1, lp1, _ = leapfrog(log_prob_and_grad, q, p, grad, eps, 1, inv_metric)
        delta = h0 - hamiltonian(lp1, p1, inv_metric) if math.isfinite(lp1) else -math.inf
        if direction == 1 and not delta > math.log(0.8):
            break
        if direction == -1 and delta > math.log(0.8):
            break
        eps = eps * 2.0 if direction == 1 else eps / 2.0
    return eps


# -------------------------------------------------------------------- chains


@dataclass
class _ChainResult:
    draws: np.ndarray
    accept: np.ndarray
    divergent: np.ndarray
    n_steps: np.ndarray
    step_size: float
    inv_metric: np.ndarray
    warmup_divergent: int


def _initial_point(model, settings: SamplerSettings, rng) -> tuple[np.ndarray, float, np.ndarray]:
    for _ in range(INIT_RETRIES):
        q = rng.uniform(-settings.init_radius, settings.init_radius, model.dim)
        lp, grad = _guarded(model.log_prob_and_grad)(q)
        if math.isfinite(lp):
            return q, lp, grad
    raise SamplerError(f"no finite log density after {INIT_RETRIES} initialisation attempts")


def _guarded(log_prob_and_grad):
    def f(q):
        if not np.all(np.isfinite(q)):
            return -math.inf, np.zeros_like(q)
        with np.errstate(over="ignore", invalid="ignore"):
            lp, grad = log_prob_and_grad(q)
        if not np.all(np.isfinite(grad)):
            return -math.inf, grad
        return lp, grad

    return f


def run_chain(model, settings: SamplerSettings, chain: int) -> _ChainResult:
    rng = np.random.default_rng(np.random.SeedSequence([settings.seed, chain]))
    f = _guarded(model.log_prob_and_grad)
    q, lp, grad = _initial_point(model, settings, rng)
    dim = q.size
    inv_metric = np.ones(dim)
    eps = _find_initial_eps(f, q, lp, grad, inv_metric, rng)
    da = DualAveraging(eps, settings.target_accept)
    window_start, window_ends = warmup_windows(settings.warmup)
    window_draws: list[np.ndarray] = []

    total = settings.warmup + settings.samples
    out = np.empty((settings.samples, dim))
    accept = np.empty(settings.samples)
    divergent = np.zeros(settings.samples, dtype=bool)
    n_steps_out = np.empty(settings.samples, dtype=int)
    warm_div = 0

    for it in range(total):
        warm = it < settings.warmup
        l_max = int(min(settings.max_steps, max(1, math.ceil(settings.path_length / eps))))
        n_steps = int(rng.integers(1, l_max + 1))
        p0 = rng.standard_normal(dim) / np.sqrt(inv_metric)
        h0 = hamiltonian(lp, p0, inv_metric)
        q1, p1, lp1, grad1 = leapfrog(f, q, p0, grad, eps, n_steps, inv_metric)
        h1 = hamiltonian(lp1, p1, inv_metric) if math.isfinite(lp1) else math.inf
        energy_error = h1 - h0
        is_div = not math.isfinite(energy_error) or energy_error > MAX_ENERGY_ERROR
        a = 0.0 if is_div else math.exp(-max(energy_error, 0.0))
        if not is_div and rng.uniform() < a:
            q, lp, grad = q1, lp1, grad1

        if warm:
            warm_div += is_div
            eps = da.update(a)
            if window_start <= it:
                window_draws.append(q.copy())
            if it + 1 in window_ends:
                samples = np.array(window_draws)
                ns = len(samples)
                if ns > 1:
                    var = samples.var(axis=0, ddof=1)
                    inv_metric = (ns / (ns + 5.0)) * var + 1e-3 * (5.0 / (ns + 5.0))
                window_draws = []
                window_start = it + 1
                eps = _find_initial_eps(f, q, lp, grad, inv_metric, rng)
                da.restart(eps)
            if it + 1 == settings.warmup:
                eps = da.final
                if warm_div == settings.warmup:
                    raise SamplerError(f"chain {chain}: every warmup transition diverged")
        else:
            j = it - settings.warmup
            out[j] = q
            accept[j] = a
            divergent[j] = is_div
            n_steps_out[j] = n_steps
    return _ChainResult(out, accept, divergent, n_steps_out, eps, inv_metric, warm_div)


def hmc_sample(model, settings: SamplerSettings | None = None, **overrides) -> tuple[PosteriorDraws, Diagnostics]:
    """Run ``settings.chains`` independent chains and summarise them.

    Each chain seeds its own generator from ``(seed, chain index)``, so results
    do not depend on whether chains run sequentially or in parallel.
    """
    settings = settings or SamplerSettings()
    if overrides:
        settings = SamplerSettings(**{**asdict(settings), **overrides})
    settings.validate()
    if settings.cores > 1:
        with ProcessPoolExecutor(settings.cores) as pool:
            results = list(pool.map(run_chain, [model] * settings.chains, [settings] * settings.chains, range(settings.chains)))
    else:
        results = [run_chain(model, settings, c) for c in range(settings.chains)]

    values = model.constrain(np.stack([r.draws for r in results]))
    if not np.all(np.isfinite(values)):
        raise SamplerError("non-finite draws")
    draws = PosteriorDraws(
        names=model.parameter_names(),
        values=values,
        settings=settings,
        accept_stat=np.stack([r.accept for r in results]),
        divergent=np.stack([r.divergent for r in results]),
        n_steps=np.stack([r.n_steps for r in results]),
        step_sizes=[r.step_size for r in results],
        inv_metric=[r.inv_metric.tolist() for r in results],
    )
    return draws, compute_diagnostics(draws)
