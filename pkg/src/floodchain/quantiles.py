"""Return levels: Markov chain model with extremal index, and conventional POT.

Both reduce to the GPD tail quantile. For the chain, the annual maximum is
approximated by ``F(y)^(n theta)`` with ``n`` observations per year; for
POT, cluster maxima arrive at ``cluster_rate`` per year.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, QuantileBelowThreshold
from .exindex import ferro_segers
from .likelihood import MarkovModel
from .marginal import GpdParams, fit_gpd_mle, fit_gpd_pwm, tail_quantile
from .series import DAYS_PER_YEAR, DailySeries, decluster_intervals, decluster_runs, exceedances

DEFAULT_PERIODS = (2, 10, 20, 50, 100)
POT_ESTIMATORS = ("mle", "pwu", "pwb")


@dataclass(frozen=True)
class ReturnSpec:
    T: float
    obs_per_year: float = DAYS_PER_YEAR

    def __post_init__(self):
        if not self.T > 1:
            raise ValueError(f"return period must exceed 1 year, got {self.T}")
        if not self.obs_per_year > 0:
            raise ValueError("obs_per_year must be positive")


def _spec(spec) -> ReturnSpec:
    return spec if isinstance(spec, ReturnSpec) else ReturnSpec(float(spec))


def return_level_markov(model: MarkovModel, spec) -> float:
    """Level exceeded by the annual maximum with probability ``1/T``.

    Solves ``F(y)^(n theta) = 1 - 1/T`` for ``y`` above the threshold.
    """
    spec = _spec(spec)
    if model.theta is None:
        raise ValueError("model has no extremal index; run the theta pipeline first")
    p = model.marginal
    # 1 - (1 - 1/T)^(1/(n theta)), accurate for large n theta
    inner = -math.expm1(math.log1p(-1.0 / spec.T) / (spec.obs_per_year * model.theta))
    tail = inner / p.lam
    if tail > 1:
        raise QuantileBelowThreshold(
            f"T={spec.T} gives a level below the threshold (lam={p.lam}, theta={model.theta})"
        )
    return float(tail_quantile(tail, p))


def return_level_pot(marginal: GpdParams, cluster_rate: float, spec) -> float:
    """``u + sigma/xi [(T rate)^xi - 1]`` for independent cluster maxima."""
    spec = _spec(spec)
    if not cluster_rate > 0:
        raise ValueError("cluster_rate must be positive")
    m = spec.T * cluster_rate
    if m <= 1:
        raise QuantileBelowThreshold(f"T * cluster_rate = {m} <= 1")
    return float(tail_quantile(1.0 / m, marginal))


@dataclass(frozen=True)
class PotFit:
    marginal: GpdParams
    cluster_rate: float  # clusters per year
    n_clusters: int
    estimator: str
    decluster: str

    def return_level(self, spec) -> float:
        return return_level_pot(self.marginal, self.cluster_rate, spec)


def fit_pot(
    window: DailySeries,
    u: float,
    estimator: str = "mle",
    decluster: str = "runs",
    run_gap: int = 2,
    obs_per_year: float = DAYS_PER_YEAR,
) -> PotFit:
    """GPD fit to cluster maxima above ``u`` (``mle``, ``pwu`` or ``pwb``)."""
    exc = exceedances(window, u)
    if decluster == "runs":
        clusters = decluster_runs(exc, run_gap)
    elif decluster == "intervals":
        if exc.n < 2:
            raise InsufficientData("intervals declustering needs two exceedances")
        clusters = decluster_intervals(exc, ferro_segers(exc).theta)
    else:
        raise ValueError(f"unknown declustering method {decluster!r}")
    maxima = clusters.maxima
    if estimator == "mle":
        marginal = fit_gpd_mle(maxima, u).params
    elif estimator in ("pwu", "pwb"):
        marginal = fit_gpd_pwm(maxima, u, biased=estimator == "pwb")
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    years = window.n_observed / obs_per_year
    return PotFit(marginal, len(clusters) / years, len(clusters), estimator, decluster)


def return_levels(fn, periods=DEFAULT_PERIODS) -> np.ndarray:
    """Evaluate ``fn(T)`` over return periods."""
    return np.array([fn(T) for T in periods])
