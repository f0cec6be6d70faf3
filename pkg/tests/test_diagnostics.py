import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_reanalysis.bayes.diagnostics import (
    RHAT_CAP,
    compute_diagnostics,
    ess_bulk,
    ess_mean,
    ess_tail,
    mcse_mean,
    mcse_sd,
    split_rhat,
)


def ar1(rng, phi, chains, n):
    x = np.empty((chains, n))
    x[:, 0] = rng.standard_normal(chains) / math.sqrt(1 - phi**2)
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + rng.standard_normal(chains)
    return x


def test_iid_rhat_near_one():
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert abs(split_rhat(rng.standard_normal((4, 1000))) - 1.0) < 0.01


def test_constant_chains_give_large_finite_rhat():
    x = np.stack([np.zeros(100), np.ones(100)])
    r = split_rhat(x)
    assert math.isfinite(r) and r >= RHAT_CAP
    assert split_rhat(np.zeros((2, 100))) == 1.0


def test_shifted_chain_detected():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 500))
    x[0] += 2.0
    assert split_rhat(x) > 1.1


def test_iid_ess_close_to_draw_count():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 1000))
    for f in (ess_bulk, ess_tail, ess_mean):
        assert abs(f(x) / 4000 - 1.0) < 0.2, f.__name__


def test_ar1_ess_matches_theory():
    rng = np.random.default_rng(3)
    phi = 0.6
    x = ar1(rng, phi, 4, 5000)
    expected = 20000 * (1 - phi) / (1 + phi)
    assert ess_mean(x) == pytest.approx(expected, rel=0.2)
    assert ess_bulk(x) == pytest.approx(expected, rel=0.2)


def test_mcse_matches_replication_spread():
    """MCSE of the mean agrees with the spread of means across replications."""
    rng = np.random.default_rng(4)
    phi = 0.5
    means, mcses = [], []
    for _ in range(200):
        x = ar1(rng, phi, 2, 500)
        means.append(x.mean())
        mcses.append(mcse_mean(x))
    assert np.mean(mcses) == pytest.approx(np.std(means), rel=0.15)


def test_mcse_sd_iid():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 2000))
    # for iid normal draws the sd estimator has standard error sd / sqrt(2 (N - 1))
    assert mcse_sd(x) == pytest.approx(1 / math.sqrt(2 * 7999), rel=0.15)


def test_single_chain_rejected():
    with pytest.raises(ValueError):
        split_rhat(np.zeros((1, 100)))
    with pytest.raises(ValueError):
        compute_diagnostics(np.zeros((1, 100, 2)))


def test_compute_diagnostics_shapes():
    rng = np.random.default_rng(6)
    diag = compute_diagnostics(rng.standard_normal((3, 200, 4)), names=list("abcd"))
    assert diag.names == list("abcd")
    assert diag.rhat.shape == diag.ess_bulk.shape == diag.ess_tail.shape == (4,)
    j = diag.to_json()
    assert set(j["parameters"]) == set("abcd")


@given(seed=st.integers(0, 10_000), power=st.integers(-20, 20))
@settings(max_examples=30, deadline=None)
def test_rhat_invariant_to_exact_rescaling(seed, power):
    # power-of-two scaling is exact in floating point, so ranks and ties are preserved
    x = np.random.default_rng(seed).standard_normal((2, 100))
    assert split_rhat(2.0**power * x) == split_rhat(x)


@given(seed=st.integers(0, 10_000), shift=st.floats(-100, 100), scale=st.floats(0.01, 100))
@settings(max_examples=30, deadline=None)
def test_bulk_ess_depends_on_ranks_only(seed, shift, scale):
    x = np.random.default_rng(seed).standard_normal((2, 100))
    assert ess_bulk(np.exp(shift / 50 + scale * x)) == pytest.approx(ess_bulk(x), rel=1e-12)
