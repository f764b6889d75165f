import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodchain.dependence import FAMILIES, Logistic, independence_model
from floodchain.diagnostics import block_bootstrap_ci, chi_pairs, lagged_pairs
from floodchain.errors import ConstraintViolation
from floodchain.exindex import theta_pipeline
from floodchain.likelihood import MarkovModel
from floodchain.marginal import GpdParams
from floodchain.simulate import (
    SimConfig,
    chain_streams,
    conditional_cdf,
    sample_next,
    simulate_chain,
    simulate_frechet,
)
from grids import ALL_MODELS


def test_conditional_cdf_at_independence():
    z2 = np.geomspace(0.01, 100, 30)
    for family in FAMILIES:
        np.testing.assert_allclose(
            conditional_cdf(z2, 1.3, independence_model(family)), np.exp(-1 / z2), rtol=1e-10, atol=1e-300
        )


@pytest.mark.parametrize("family, dep", ALL_MODELS)
def test_conditional_cdf_is_a_distribution(family, dep):
    z2 = np.geomspace(1e-3, 1e6, 200)
    for z1 in (0.1, 1.0, 20.0):
        c = conditional_cdf(z2, z1, dep)
        assert np.all((c >= 0) & (c <= 1))
        assert np.all(np.diff(c) >= -1e-12)
        assert conditional_cdf(1e12, z1, dep) == pytest.approx(1.0, abs=1e-5)
        assert conditional_cdf(1e-6, z1, dep) < 1e-3


def test_conditional_cdf_is_normalized_derivative():
    dep = Logistic(0.4)
    z1, z2, h = 0.8, 1.7, 1e-6
    joint = lambda a, b: math.exp(-float(dep.V(a, b)))  # noqa: E731
    fd = (joint(z1 + h, z2) - joint(z1 - h, z2)) / (2 * h)
    marginal_density = math.exp(-1 / z1) / z1**2
    assert conditional_cdf(z2, z1, dep) == pytest.approx(fd / marginal_density, rel=1e-7)


def test_sample_next_independence_hand_value():
    z = sample_next(np.array([2.0]), independence_model("log"), np.array([0.5]))
    assert z[0] == pytest.approx(-1 / math.log(0.5), rel=1e-10)


@settings(max_examples=150, deadline=None)
@given(
    st.sampled_from(ALL_MODELS),
    st.floats(1e-3, 1e4),
    st.floats(1e-9, 1 - 1e-9),
)
def test_inversion_round_trip(fm, z1, draw):
    _, dep = fm
    z2 = sample_next(np.array([z1]), dep, np.array([draw]))
    assert conditional_cdf(z2, z1, dep)[0] == pytest.approx(draw, abs=1e-8)


def test_streams_are_per_chain_and_deterministic():
    a = chain_streams(SimConfig(3, 50, 9, 0), 50)
    b = chain_streams(SimConfig(5, 50, 9, 0), 50)
    np.testing.assert_array_equal(a, b[:3])
    assert not np.array_equal(a[0], a[1])


def test_simulation_bit_identical_per_seed(amix_model):
    cfg = SimConfig(4, 300, 21, 50)
    a = simulate_chain(amix_model, cfg)
    b = simulate_chain(amix_model, cfg)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_chain(amix_model, SimConfig(4, 300, 22, 50))
    assert not np.array_equal(a.z, c.z)


def test_exceedance_rate_matches_lambda(amix_model):
    cfg = SimConfig(20, 2000, 5)
    sims = simulate_chain(amix_model, cfg)
    lam = amix_model.marginal.lam
    n = sims.exceeds.size
    # clustering inflates the binomial variance; use per-chain spread
    rates = sims.exceeds.mean(axis=1)
    se = rates.std(ddof=1) / math.sqrt(rates.size)
    assert abs(rates.mean() - lam) < 3 * se
    assert n == 40_000
    assert np.all(np.isnan(sims.values[~sims.exceeds]))
    assert np.all(sims.values[sims.exceeds] > amix_model.marginal.u)


def test_simulated_chi_close_to_theoretical():
    dep = Logistic(0.5)
    z = simulate_frechet(dep, SimConfig(40, 1000, 3))
    pairs = np.concatenate([lagged_pairs(row) for row in z])
    chi_hat = chi_pairs(pairs, 0.98)
    lo, hi = block_bootstrap_ci(pairs, lambda d: chi_pairs(d, 0.98), n_boot=200, seed=1)
    # C(w, w) = w^V(1,1) for an extreme-value copula, so chi(w) is constant
    exact = 2 - float(dep.V(1.0, 1.0))
    assert lo <= exact <= hi
    assert chi_hat == pytest.approx(exact, abs=0.08)


def test_independent_chains_have_unit_theta():
    m = MarkovModel(GpdParams(0.0, 0.05, 1.0, 0.0), independence_model("log"))
    est = theta_pipeline(m, SimConfig(20, 2000, 1))
    assert est.theta == pytest.approx(1.0, abs=0.05)


def test_invalid_model_rejected():
    with pytest.raises(ConstraintViolation):
        simulate_chain(MarkovModel(GpdParams(0, 0.1, 1, 0), Logistic(2.0)), SimConfig(1, 10, 0, 0))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0, 100)
    with pytest.raises(ValueError):
        SimConfig(1, 100, 0, 100)
