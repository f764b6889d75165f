import math

import numpy as np
import pytest
from scipy import optimize

from floodchain.dependence import AsymMixed
from floodchain.errors import InsufficientData, QuantileBelowThreshold
from floodchain.likelihood import MarkovModel
from floodchain.marginal import GpdParams, gpd_cdf
from floodchain.quantiles import (
    DEFAULT_PERIODS,
    ReturnSpec,
    fit_pot,
    return_level_markov,
    return_level_pot,
    return_levels,
)


def markov(u=0.0, lam=0.05, sigma=1.0, xi=0.1, theta=0.4):
    return MarkovModel(GpdParams(u, lam, sigma, xi), AsymMixed(0.3, 0.2), theta)


def root_oracle(m, T, n=365.25):
    """Solve F(y)^(n theta) = 1 - 1/T by bracketing on the log scale."""
    target = math.log1p(-1 / T)

    def g(y):
        return n * m.theta * math.log(float(gpd_cdf(y, m.marginal))) - target

    hi = m.marginal.u + 1.0
    while g(hi) < 0:
        hi = m.marginal.u + 2 * (hi - m.marginal.u)
    return optimize.brentq(g, m.marginal.u, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def test_matches_root_finding_oracle():
    m = markov()
    assert return_level_markov(m, 100) == pytest.approx(root_oracle(m, 100), rel=1e-9)


def test_exponential_asymptote():
    m = MarkovModel(GpdParams(2.0, 1.0, 1.5, 0.0), AsymMixed(), 1.0)
    T = 1e6
    q = return_level_markov(m, ReturnSpec(T, obs_per_year=1.0))
    assert q == pytest.approx(2.0 + 1.5 * math.log(T), rel=1e-6)


def test_increasing_in_period_and_decreasing_when_theta_halves():
    m = markov()
    levels = return_levels(lambda T: return_level_markov(m, T), DEFAULT_PERIODS)
    assert np.all(np.diff(levels) > 0)
    half = markov(theta=0.2)
    assert return_level_markov(half, 50) < return_level_markov(m, 50)
    assert return_level_markov(half, 50) == pytest.approx(root_oracle(half, 50), rel=1e-9)


def test_xi_zero_limit_continuous():
    base = return_level_markov(markov(xi=0.0), 50)
    closed = 0.0 + math.log(0.05 / -math.expm1(math.log1p(-1 / 50) / (365.25 * 0.4)))
    assert base == pytest.approx(closed, rel=1e-12)
    for xi in (1e-9, -1e-9, 1e-7):
        assert return_level_markov(markov(xi=xi), 50) == pytest.approx(base, rel=1e-6)


def test_below_threshold_error():
    m = MarkovModel(GpdParams(0.0, 1e-4, 1.0, 0.1), AsymMixed(), 0.01)
    with pytest.raises(QuantileBelowThreshold):
        return_level_markov(m, 1.5)


def test_requires_theta():
    with pytest.raises(ValueError):
        return_level_markov(markov(theta=None), 10)


@pytest.mark.parametrize("T", [1.0, 0.5])
def test_return_period_must_exceed_one(T):
    with pytest.raises(ValueError):
        ReturnSpec(T)


def test_pot_hand_value():
    p = GpdParams(0.0, 1.0, 1.0, 0.0)
    assert return_level_pot(p, 2.0, 50) == pytest.approx(math.log(100), rel=1e-14)
    heavy = GpdParams(0.0, 1.0, 1.0, 0.2)
    assert return_level_pot(heavy, 2.0, 50) == pytest.approx((100**0.2 - 1) / 0.2, rel=1e-14)
    with pytest.raises(QuantileBelowThreshold):
        return_level_pot(p, 0.5, 2)


def test_pot_matches_markov_with_unit_theta_for_long_periods():
    p = GpdParams(5.0, 0.02, 2.0, 0.15)
    n = 365.25
    m = MarkovModel(p, AsymMixed(), 1.0)
    for T in (100, 1000):
        assert return_level_pot(p, p.lam * n, T) == pytest.approx(return_level_markov(m, T), rel=0.01)


def test_fit_pot_estimators(station):
    fits = {e: fit_pot(station, 10.0, e) for e in ("mle", "pwu", "pwb")}
    for fit in fits.values():
        assert fit.n_clusters > 10
        assert fit.cluster_rate == pytest.approx(fit.n_clusters / (station.n_observed / 365.25))
        assert fit.return_level(100) > fit.return_level(10) > 10.0
    intervals = fit_pot(station, 10.0, "mle", decluster="intervals")
    assert intervals.decluster == "intervals"
    with pytest.raises(ValueError):
        fit_pot(station, 10.0, "lmom")
    with pytest.raises(ValueError):
        fit_pot(station, 10.0, "mle", decluster="blocks")


def test_fit_pot_needs_exceedances(station):
    with pytest.raises(InsufficientData):
        fit_pot(station, 1e6, "mle", decluster="intervals")
