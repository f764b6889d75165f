import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodchain.dependence import FAMILIES, AsymLogistic, AsymMixed, Logistic, independence_model
from floodchain.errors import InsufficientData, NonPositiveDensity, SupportExceeded
from floodchain.likelihood import (
    ChainData,
    MarkovModel,
    censored_points,
    censored_z,
    chain_loglik,
    fit_markov,
    frechet_transform,
    marginal_loglik,
    pair_loglik,
)
from floodchain.marginal import GpdParams, gpd_cdf
from floodchain.simulate import SimConfig, simulate_chain
from grids import ALL_MODELS

P = GpdParams(10.0, 0.1, 1.0, 0.1)


def test_censored_z_hand_values():
    assert censored_z(GpdParams(0, 1 - math.exp(-1), 1, 0)) == pytest.approx(1.0, rel=1e-15)
    # F(y) = exp(-1/2) gives z = 2
    p = GpdParams(0.0, 0.5, 1.0, 0.0)
    y = -math.log((1 - math.exp(-0.5)) / 0.5)
    assert frechet_transform(y, p) == pytest.approx(2.0, rel=1e-12)


def test_frechet_transform_monotone_and_censored():
    y = np.linspace(5, 30, 200)
    z = frechet_transform(y, P)
    assert np.all(np.diff(z[y > P.u]) > 0)
    assert np.all(z[y <= P.u] == censored_z(P))


def test_support_exceeded():
    p = GpdParams(0.0, 0.2, 1.0, -0.5)
    with pytest.raises(SupportExceeded):
        censored_points([0.5, 2.5], p)


def test_marginal_loglik_branches():
    assert marginal_loglik(9.0, P) == pytest.approx(math.log(0.9))
    assert marginal_loglik(10.0 + 1e-12, P) == pytest.approx(math.log(0.1 / 1.0))


def test_jacobian_is_derivative_of_z():
    y = np.array([10.2, 11.0, 14.0, 25.0])
    pts = censored_points(y, P)
    h = 1e-6
    dz = (frechet_transform(y + h, P) - frechet_transform(y - h, P)) / (2 * h)
    np.testing.assert_allclose(np.exp(pts.log_k), dz, rtol=1e-7)


def test_both_censored_pair():
    m = MarkovModel(P, AsymMixed(0.3, 0.2))
    zu = censored_z(P)
    assert pair_loglik(9.0, 8.0, m) == pytest.approx(-float(m.dep.V(zu, zu)), rel=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_pair_factorizes_at_independence(family):
    m = MarkovModel(P, independence_model(family))
    y1 = np.array([9.0, 12.0, 9.5, 15.0, 10.5])
    y2 = np.array([8.0, 9.0, 13.0, 11.0, 30.0])
    expected = marginal_loglik(y1, P) + marginal_loglik(y2, P)
    np.testing.assert_allclose(pair_loglik(y1, y2, m), expected, rtol=0, atol=1e-8)


def _joint_cdf(m, y1, y2):
    z1 = -1 / np.log(gpd_cdf(y1, m.marginal))
    z2 = -1 / np.log(gpd_cdf(y2, m.marginal))
    return np.exp(-m.dep.V(z1, z2))


def _joint_survival(m, y1, y2):
    """``1 - F1 - F2 + F`` and the magnitude of its terms.

    It has the same mixed derivative as the joint cdf but is computed
    without the cancellation against 1 that limits differences of ``F``.
    """
    a = -np.log(gpd_cdf(y1, m.marginal))
    b = -np.log(gpd_cdf(y2, m.marginal))
    v = m.dep.V(1 / a, 1 / b)
    return -np.expm1(-a) - np.expm1(-b) + np.expm1(-v), a + b + v


def numeric_density(m, y1, y2, h=3e-3):
    """Richardson-extrapolated mixed difference of the joint survival function and its roundoff level."""

    def s(u, v):
        return _joint_survival(m, u, v)[0]

    def d(e):
        return (s(y1 + e, y2 + e) - s(y1 + e, y2 - e) - s(y1 - e, y2 + e) + s(y1 - e, y2 - e)) / (4 * e * e)

    roundoff = 8 * np.finfo(float).eps * float(_joint_survival(m, y1, y2)[1]) / (h / 2) ** 2
    return float((4 * d(h / 2) - d(h)) / 3), roundoff


DENSITY_POINTS = [(10.5, 11.0), (12.0, 10.2), (11.3, 14.0), (10.1, 10.15), (16.0, 15.0)]


@pytest.mark.parametrize("family, dep", ALL_MODELS)
def test_density_branch_matches_mixed_derivative(family, dep):
    m = MarkovModel(P, dep)
    for y1, y2 in DENSITY_POINTS:
        dens = math.exp(float(pair_loglik(y1, y2, m)))
        num, roundoff = numeric_density(m, y1, y2)
        if dens > 1e5 * roundoff:
            assert dens == pytest.approx(num, rel=1e-4)
        else:
            # density too small for differences of the cdf to resolve
            assert abs(dens - num) < 10 * roundoff


def test_one_censored_branch_is_partial_derivative():
    m = MarkovModel(P, AsymLogistic(0.4, 0.7, 0.9))
    y1, h = 11.5, 1e-5
    fd = (_joint_cdf(m, y1 + h, P.u) - _joint_cdf(m, y1 - h, P.u)) / (2 * h)
    assert math.exp(float(pair_loglik(y1, 9.0, m))) == pytest.approx(float(fd), rel=1e-6)


def test_three_point_index_audit():
    m = MarkovModel(P, AsymMixed(0.3, 0.2))
    y = np.array([11.0, 12.5, 9.0])
    expected = pair_loglik(y[0], y[1], m) + pair_loglik(y[1], y[2], m) - marginal_loglik(y[1], P)
    assert chain_loglik(y, m) == pytest.approx(float(expected), rel=1e-13)


def test_masked_day_breaks_the_chain():
    m = MarkovModel(P, AsymMixed(0.3, 0.2))
    y = np.array([11.0, 12.5, np.nan, 13.0, 9.0])
    two = pair_loglik(11.0, 12.5, m) + pair_loglik(13.0, 9.0, m)
    assert chain_loglik(y, m) == pytest.approx(float(two), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(FAMILIES))
def test_chain_factorizes_at_independence(seed, family):
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(200) < 0.2, 10 + rng.exponential(1.0, 200), rng.uniform(0, 10, 200))
    m = MarkovModel(P, independence_model(family))
    assert chain_loglik(y, m) == pytest.approx(float(np.sum(marginal_loglik(y, P))), abs=1e-8)


def test_time_reversal_changes_asymmetric_likelihood():
    m = MarkovModel(P, AsymMixed(0.3, 0.2))
    y = simulate_chain(m, SimConfig(1, 600, 3)).to_series(0).values
    assert abs(chain_loglik(y, m) - chain_loglik(y[::-1], m)) > 1e-3
    sym = MarkovModel(P, Logistic(0.5))
    assert chain_loglik(y, sym) == pytest.approx(chain_loglik(y[::-1], sym), rel=1e-12)


def test_non_positive_density_detected():
    bad = MarkovModel(P, Logistic(1.5))
    with pytest.raises(NonPositiveDensity):
        pair_loglik(11.0, 12.0, bad)


def test_chain_data_counts():
    d = ChainData(np.array([9.0, 11.0, np.nan, 12.0, 8.0, 7.0]), 10.0)
    assert d.n_observed == 5
    assert d.n_exceed == 2
    assert d.n_pairs == 3
    assert d.n_censored_pairs == 1


def test_fit_recovers_and_dominates_truth(amix_model):
    window = simulate_chain(amix_model, SimConfig(1, 5000, 11)).to_series(0)
    rep = fit_markov(window, 10.0, "amix", seed=0)
    assert rep.converged
    assert rep.loglik >= chain_loglik(window, amix_model)
    p = rep.model.marginal
    assert p.sigma == pytest.approx(1.0, rel=0.2)
    assert p.lam == pytest.approx(rep.n_exceed / rep.n_observed)
    assert rep.model.dep.is_valid


def test_fit_rejects_degenerate_window():
    with pytest.raises(InsufficientData):
        fit_markov(np.full(500, 12.0), 10.0, "log")
    with pytest.raises(InsufficientData):
        fit_markov(np.full(500, 1.0), 10.0, "log")


def test_fit_is_deterministic(amix_model):
    window = simulate_chain(amix_model, SimConfig(1, 1500, 2)).to_series(0)
    a = fit_markov(window, 10.0, "log", seed=4)
    b = fit_markov(window, 10.0, "log", seed=4)
    assert a.model == b.model and a.loglik == b.loglik
