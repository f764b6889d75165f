"""Benchmarking return-level estimators on sub-series of long records.

Each station's full record provides a benchmark ``Q_T``; every sub-series
(window) of a given length is then fitted by each estimator and the
normalized errors ``(Q_hat - Q_T) / Q_T`` are pooled into normalized
bias, variance and mean squared error.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dependence import FAMILIES
from .errors import FloodChainError, InputError
from .exindex import theta_pipeline
from .likelihood import fit_markov
from .quantiles import DEFAULT_PERIODS, POT_ESTIMATORS, ReturnSpec, fit_pot, return_level_markov
from .series import DAYS_PER_YEAR, DailySeries, resolve_threshold, sliding_windows
from .simulate import SimConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Score:
    n: int
    nbias: float
    var: float
    nmse: float
    se_nbias: float
    se_var: float
    se_nmse: float


def score_errors(rel_errors) -> Score:
    """Scores from normalized errors ``r_i = (Q_hat_i - Q) / Q``.

    Standard errors follow the delta method on sample moments:
    ``sd(r)/sqrt(N)`` for the bias, ``sqrt((m4 - m2^2)/N)`` for the variance
    and ``sd(r^2)/sqrt(N)`` for the mean squared error.
    """
    r = np.asarray(rel_errors, dtype=float)
    n = r.size
    if n < 2:
        raise ValueError("need at least 2 estimates")
    nbias = float(np.mean(r))
    d = r - nbias
    var = float(np.sum(d * d) / (n - 1))
    nmse = float(np.mean(r * r))
    m2 = float(np.mean(d**2))
    m4 = float(np.mean(d**4))
    return Score(
        n=n,
        nbias=nbias,
        var=var,
        nmse=nmse,
        se_nbias=math.sqrt(var / n),
        se_var=math.sqrt(max(m4 - m2 * m2, 0.0) / n),
        se_nmse=float(np.std(r * r, ddof=1) / math.sqrt(n)),
    )


def score(estimates, benchmark: float) -> Score:
    if not benchmark > 0:
        raise ValueError(f"benchmark must be positive, got {benchmark}")
    est = np.asarray(estimates, dtype=float)
    return score_errors((est - benchmark) / benchmark)


@dataclass(frozen=True)
class ExperimentConfig:
    thresholds: dict = field(default_factory=dict)  # station id -> threshold spec
    default_threshold: object = "q:0.9"
    window_years: tuple = (5, 10, 15, 20)
    families: tuple = FAMILIES
    pot_estimators: tuple = POT_ESTIMATORS
    periods: tuple = DEFAULT_PERIODS
    decluster: str = "runs"
    run_gap: int = 2
    n_chains: int = 20
    chain_len: int = 1000
    burn_in: int = 100
    obs_per_year: float = DAYS_PER_YEAR
    seed: int = 0

    def threshold_for(self, station_id: str):
        return self.thresholds.get(station_id, self.default_threshold)

    @property
    def estimators(self) -> tuple:
        return tuple(self.families) + tuple(self.pot_estimators)


@dataclass(frozen=True)
class WindowEstimate:
    station: str
    window_years: int
    start_year: int
    estimator: str
    T: float
    estimate: float  # NaN when the fit failed
    benchmark: float
    error: Optional[str] = None


@dataclass(frozen=True)
class EstimatorReport:
    estimator: str
    window_years: int
    T: float
    estimates: np.ndarray
    benchmarks: np.ndarray
    n_failed: int
    score: Optional[Score]

    @property
    def failure_rate(self) -> float:
        total = self.estimates.size + self.n_failed
        return self.n_failed / total if total else 0.0


def task_seed(seed: int, station: str, *keys: int) -> int:
    """Seed for one (station, window, estimator) task, independent of run order."""
    ss = np.random.SeedSequence([seed, zlib.crc32(station.encode()), *keys])
    return int(ss.generate_state(1, np.uint32)[0])


def _markov_levels(window, u, family, seed, cfg: ExperimentConfig, specs):
    fit = fit_markov(window, u, family, seed=seed)
    sim = SimConfig(cfg.n_chains, cfg.chain_len, seed, cfg.burn_in)
    model = fit.model.with_theta(theta_pipeline(fit.model, sim).theta)
    return [return_level_markov(model, s) for s in specs]


def _pot_levels(window, u, estimator, cfg: ExperimentConfig, specs):
    pot = fit_pot(window, u, estimator, cfg.decluster, cfg.run_gap, cfg.obs_per_year)
    return [pot.return_level(s) for s in specs]


def benchmark_levels(series: DailySeries, u: float, cfg: ExperimentConfig) -> dict:
    """Conventional POT maximum likelihood return levels from the full record."""
    specs = [ReturnSpec(T, cfg.obs_per_year) for T in cfg.periods]
    return dict(zip(cfg.periods, _pot_levels(series, u, "mle", cfg, specs)))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list

    def reports(self, station: Optional[str] = None) -> list[EstimatorReport]:
        """Scores per (estimator, window length, T), optionally for one station."""
        out = []
        cfg = self.config
        for wy in cfg.window_years:
            for T in cfg.periods:
                for est in cfg.estimators:
                    sel = [
                        r for r in self.rows
                        if r.window_years == wy and r.T == T and r.estimator == est
                        and (station is None or r.station == station)
                    ]
                    ok = [r for r in sel if r.error is None]
                    e = np.array([r.estimate for r in ok])
                    b = np.array([r.benchmark for r in ok])
                    s = score_errors((e - b) / b) if len(ok) >= 2 else None
                    out.append(EstimatorReport(est, wy, T, e, b, len(sel) - len(ok), s))
        return out


def run_experiment(
    stations: Sequence[DailySeries],
    config: ExperimentConfig = ExperimentConfig(),
    benchmarks: Optional[dict] = None,
) -> ExperimentResult:
    """Fit every estimator on every window of every station.

    ``benchmarks`` optionally maps station id to ``{T: Q_T}`` and replaces
    the full-record POT benchmark (e.g. the known truth of synthetic data).
    Failed fits are kept as rows with an error message and excluded from
    the scores.
    """
    cfg = config
    for f in cfg.families:
        if f not in FAMILIES:
            raise InputError(f"unknown family {f!r}")
    specs = [ReturnSpec(T, cfg.obs_per_year) for T in cfg.periods]
    ids = [s.station_id for s in stations]
    if len(set(ids)) != len(ids):
        raise InputError("station ids must be unique")
    rows = []
    # fixed processing order makes the result independent of input order
    for series in sorted(stations, key=lambda s: s.station_id):
        sid = series.station_id
        u = resolve_threshold(series, cfg.threshold_for(sid))
        if benchmarks is not None and sid in benchmarks:
            bench = {T: float(benchmarks[sid][T]) for T in cfg.periods}
        else:
            bench = benchmark_levels(series, u, cfg)
        for wy in cfg.window_years:
            if len(series) < math.floor((wy + 1) * DAYS_PER_YEAR):
                log.warning("station %s shorter than %d years; skipped for this length", sid, wy + 1)
                continue
            for k, window in enumerate(sliding_windows(series, wy)):
                for e_idx, est in enumerate(cfg.estimators):
                    try:
                        if est in cfg.families:
                            seed = task_seed(cfg.seed, sid, wy, k, e_idx)
                            levels = _markov_levels(window, u, est, seed, cfg, specs)
                        else:
                            levels = _pot_levels(window, u, est, cfg, specs)
                        errors = [None] * len(specs)
                    except (FloodChainError, ValueError) as exc:
                        levels = [math.nan] * len(specs)
                        errors = [f"{type(exc).__name__}: {exc}"] * len(specs)
                    for T, q, err in zip(cfg.periods, levels, errors):
                        rows.append(WindowEstimate(sid, wy, k, est, T, float(q), bench[T], err))
    return ExperimentResult(cfg, rows)
