import numpy as np
import pytest

from causal_reanalysis.bayes.hmc import PosteriorDraws, SamplerSettings, hmc_sample
from causal_reanalysis.bayes.model import GlmmModel, ModelSpec, build_model
from causal_reanalysis.bayes.predictive import (
    PosteriorPredictive,
    exceedance_fraction,
    posterior_predictive,
    prior_predictive,
)
from causal_reanalysis.simulate import simulate_dataset


def grouped_model(n_value=3, rows=40):
    """Passive indicator plus two crossed groupings, every denominator ``n_value``."""
    spec = build_model(simulate_dataset(4, 2, seed=0), "actors")
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, (rows, 1)).astype(float)
    idx = [np.arange(rows) % 8, np.arange(rows) % 5]
    labels = [[str(i) for i in range(8)], [str(i) for i in range(5)]]
    return GlmmModel(spec, X, np.zeros(rows), np.full(rows, n_value), idx, labels)


def test_prior_predictive_support():
    d = simulate_dataset(15, 7, seed=3)
    for response in ("actors", "objects", "associations"):
        m = GlmmModel.from_dataset(build_model(d, response), d)
        pp = prior_predictive(m, n_sims=300, seed=1)
        assert pp.summary()["within_support"]
        assert np.all((pp.simulations >= 0) & (pp.simulations <= m.n))


def test_prior_mean_proportion_is_one_half():
    pp = prior_predictive(grouped_model(3), n_sims=4000, seed=2)
    prop = pp.simulations.mean(axis=1) / 3
    se = prop.std(ddof=1) / np.sqrt(len(prop))
    assert abs(prop.mean() - 0.5) < 4 * se
    assert pp.summary()["mean_proportion"] == pytest.approx(prop.mean())


def test_zero_denominators_give_zero_counts():
    pp = prior_predictive(grouped_model(0), n_sims=200, seed=3)
    assert np.all(pp.simulations == 0)


def test_exceedance_fraction_counts_ties_half():
    assert exceedance_fraction(1.0, np.array([0.0, 1.0, 2.0, 3.0])) == pytest.approx(0.625)
    obs = np.array([0, 1, 2, 1])
    checks = PosteriorPredictive(np.tile(obs, (25, 1)), obs).checks()
    assert all(c["fraction_exceeding"] == 0.5 for c in checks.values())


def test_near_certain_zero_fit_replicates_zeros():
    m = grouped_model(5)
    names = m.parameter_names()
    values = np.zeros((2, 50, len(names)))
    values[:, :, 0] = -25.0  # alpha
    values[:, :, names.index("sigma_participant")] = 1e-3
    values[:, :, names.index("sigma_requirement")] = 1e-3
    draws = PosteriorDraws(names, values, SamplerSettings(chains=2))
    checks = posterior_predictive(m, draws, seed=0).checks()
    assert checks["mean"]["replicated_mean"] == pytest.approx(0.0, abs=1e-6)


def test_self_consistency_on_simulated_data():
    d = simulate_dataset(15, 7, seed=21)
    m = GlmmModel.from_dataset(build_model(d, "objects"), d)
    draws, _ = hmc_sample(m, SamplerSettings(chains=2, warmup=400, samples=500, seed=21))
    checks = posterior_predictive(m, draws, seed=21).checks()
    for name, c in checks.items():
        assert 0.05 < c["fraction_exceeding"] < 0.95, name


def test_thinning_and_determinism():
    d = simulate_dataset(6, 3, seed=1)
    m = GlmmModel.from_dataset(build_model(d, "actors"), d)
    names = m.parameter_names()
    rng = np.random.default_rng(0)
    values = rng.normal(0, 0.3, (2, 40, len(names)))
    values[:, :, -2:] = np.abs(values[:, :, -2:])
    draws = PosteriorDraws(names, values, SamplerSettings(chains=2))
    a = posterior_predictive(m, draws, seed=5, max_draws=10)
    b = posterior_predictive(m, draws, seed=5, max_draws=10)
    assert a.replicates.shape == (10, len(m.k))
    assert np.array_equal(a.replicates, b.replicates)


def test_intercept_only_spec_works():
    spec = ModelSpec("actors", (), varying=())
    m = GlmmModel(spec, np.zeros((3, 0)), [0, 1, 2], [2, 2, 2], [], [])
    assert prior_predictive(m, n_sims=10, seed=0).summary()["max_denominator"] == 2
