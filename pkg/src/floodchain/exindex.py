"""Extremal index: intervals estimator and the simulation-averaging pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientExceedances
from .likelihood import MarkovModel
from .series import ExceedanceSet, decluster_runs
from .simulate import SimConfig, simulate_chain

THETA_FLOOR = 1e-6


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    N: int
    method: str
    per_chain: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_skipped: int = 0  # chains with fewer than two exceedances

    def histogram(self, bins=10):
        """Counts and edges of the per-chain estimates on [0, 1]."""
        return np.histogram(self.per_chain, bins=bins, range=(0.0, 1.0))


def _indices(exc) -> np.ndarray:
    if isinstance(exc, ExceedanceSet):
        return exc.indices
    return np.asarray(exc, dtype=np.int64)


def intervals_theta(indices) -> float:
    """Intervals estimator from exceedance positions, capped at 1 and floored at 1e-6."""
    s = np.asarray(indices, dtype=np.int64)
    if s.size < 2:
        raise InsufficientExceedances(f"need at least 2 exceedances, got {s.size}")
    t = np.diff(s).astype(float)
    n = s.size
    if t.max() <= 2:
        num = 2.0 * np.sum(t - 1.0) ** 2
        den = (n - 1) * np.sum(t * t)
    else:
        num = 2.0 * np.sum(t) ** 2
        den = (n - 1) * np.sum((t - 1.0) * (t - 2.0))
    theta = min(1.0, num / den)
    return max(theta, THETA_FLOOR)


def ferro_segers(exc) -> ThetaEstimate:
    """Intervals estimate for an :class:`ExceedanceSet` (or raw positions)."""
    idx = _indices(exc)
    return ThetaEstimate(intervals_theta(idx), int(idx.size), "intervals")


def runs_theta(exc: ExceedanceSet, run_gap: int = 2) -> float:
    """Clusters per exceedance under runs declustering; a cross-check only."""
    if exc.n == 0:
        raise InsufficientExceedances("no exceedances")
    return len(decluster_runs(exc, run_gap)) / exc.n


def _chain_exceedances(flags: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(row) for row in flags]


def theta_pipeline(model: MarkovModel, cfg: SimConfig = SimConfig()) -> ThetaEstimate:
    """Mean intervals estimate over chains simulated from ``model``.

    Chains with fewer than two exceedances carry no information on clustering
    and are skipped; at least one chain must remain.
    """
    sims = simulate_chain(model, cfg)
    values = []
    n_total = 0
    for idx in _chain_exceedances(sims.exceeds):
        if idx.size < 2:
            continue
        values.append(intervals_theta(idx))
        n_total += idx.size
    if not values:
        raise InsufficientExceedances("no simulated chain has two exceedances")
    per_chain = np.array(values)
    return ThetaEstimate(
        float(per_chain.mean()), n_total, "pipeline", per_chain, cfg.n_chains - per_chain.size
    )
