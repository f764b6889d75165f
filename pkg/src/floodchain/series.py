"""Daily discharge series: parsing, windowing, exceedances and declustering."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .errors import MalformedRow, NegativeDischarge, NonIncreasingDates

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class DailySeries:
    """One value per calendar day starting at ``start_date``.

    Missing days carry ``mask=True``; their entry in ``values`` is NaN.
    """

    station_id: str
    start_date: dt.date
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.isnan(values) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape or values.ndim != 1:
            raise ValueError("values and mask must be 1-d arrays of equal length")
        values = np.where(mask, np.nan, values)
        observed = values[~mask]
        if not np.all(np.isfinite(observed)) or np.any(observed < 0):
            raise ValueError("unmasked values must be finite and non-negative")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.values.size

    @property
    def n_observed(self) -> int:
        return int(np.count_nonzero(~self.mask))

    @property
    def observed(self) -> np.ndarray:
        return self.values[~self.mask]

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    def slice(self, start: int, stop: int) -> "DailySeries":
        return DailySeries(
            self.station_id,
            self.start_date + dt.timedelta(days=start),
            self.values[start:stop],
            self.mask[start:stop],
        )


@dataclass(frozen=True)
class ExceedanceSet:
    threshold: float
    indices: np.ndarray
    values: np.ndarray
    n_total: int
    n_observed: int

    @property
    def n(self) -> int:
        return self.indices.size

    @property
    def lambda_hat(self) -> float:
        return self.n / self.n_observed if self.n_observed else 0.0


@dataclass(frozen=True)
class ClusterSet:
    members: list = field(default_factory=list)
    maxima: np.ndarray = field(default_factory=lambda: np.empty(0))
    method: str = "runs"

    @property
    def clusters(self) -> list[tuple[int, int]]:
        """Inclusive (first, last) index range of each cluster."""
        return [(int(m[0]), int(m[-1])) for m in self.members]

    def __len__(self):
        return len(self.members)


def parse_series(stream: TextIO, station_id: str = "") -> DailySeries:
    """Read a ``date,discharge`` CSV. Empty discharge fields are missing days.

    Row numbers in errors count data rows from 1 (the header is not counted).
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(0, "empty input") from None
    if [h.strip().lower() for h in header] != ["date", "discharge"]:
        raise MalformedRow(0, "header must be 'date,discharge'")

    dates: list[dt.date] = []
    raw: list[float] = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise MalformedRow(row_no, "expected two fields")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise MalformedRow(row_no, f"bad date {row[0]!r}") from None
        text = row[1].strip()
        if text:
            try:
                value = float(text)
            except ValueError:
                raise MalformedRow(row_no, f"bad discharge {text!r}") from None
            if not math.isfinite(value):
                raise MalformedRow(row_no, "non-finite discharge")
            if value < 0:
                raise NegativeDischarge(row_no)
        else:
            value = math.nan
        if dates and day <= dates[-1]:
            raise NonIncreasingDates(row_no)
        dates.append(day)
        raw.append(value)

    if not dates:
        raise MalformedRow(0, "no data rows")
    offsets = np.array([(d - dates[0]).days for d in dates])
    values = np.full(offsets[-1] + 1, np.nan)
    values[offsets] = raw
    return DailySeries(station_id, dates[0], values)


def year_start(k: int) -> int:
    """Index of the first day of year ``k`` of a series (365.25-day years)."""
    return int(math.floor(k * DAYS_PER_YEAR))


def sliding_windows(series: DailySeries, window_years: int) -> list[DailySeries]:
    """All complete ``window_years`` windows, stepping one year at a time."""
    if window_years < 1:
        raise ValueError("window_years must be >= 1")
    windows = []
    k = 0
    while year_start(k + window_years) <= len(series):
        windows.append(series.slice(year_start(k), year_start(k + window_years)))
        k += 1
    return windows


def exceedances(series: DailySeries, u: float) -> ExceedanceSet:
    """Unmasked days strictly above ``u``."""
    if not math.isfinite(u):
        raise ValueError("threshold must be finite")
    if series.n_observed == 0:
        raise ValueError("series has no observed values")
    with np.errstate(invalid="ignore"):
        above = (series.values > u) & ~series.mask
    idx = np.flatnonzero(above)
    return ExceedanceSet(float(u), idx, series.values[idx], len(series), series.n_observed)


def _clusters_from_breaks(exc: ExceedanceSet, breaks: Iterable[int], method: str) -> ClusterSet:
    if exc.n == 0:
        return ClusterSet([], np.empty(0), method)
    cuts = sorted(int(b) + 1 for b in breaks)
    idx_groups = np.split(exc.indices, cuts)
    val_groups = np.split(exc.values, cuts)
    maxima = np.array([v.max() for v in val_groups])
    return ClusterSet(idx_groups, maxima, method)


def decluster_runs(exc: ExceedanceSet, run_gap: int) -> ClusterSet:
    """Runs declustering: exceedances at most ``run_gap`` days apart share a cluster.

    Gaps are calendar distances, so masked days inside a gap count toward it.
    """
    if run_gap < 1:
        raise ValueError("run_gap must be >= 1")
    gaps = np.diff(exc.indices)
    return _clusters_from_breaks(exc, np.flatnonzero(gaps > run_gap), "runs")


def decluster_intervals(exc: ExceedanceSet, theta_hat: float) -> ClusterSet:
    """Intervals declustering: split at the C-1 largest inter-exceedance times.

    ``C = max(1, floor(theta_hat * N))``; ties go to the earliest gap.
    """
    if not 0 < theta_hat <= 1:
        raise ValueError("theta_hat must lie in (0, 1]")
    if exc.n < 2:
        return _clusters_from_breaks(exc, [], "intervals")
    n_clusters = max(1, math.floor(theta_hat * exc.n))
    gaps = np.diff(exc.indices)
    order = np.argsort(-gaps, kind="stable")
    return _clusters_from_breaks(exc, order[: n_clusters - 1], "intervals")


def resolve_threshold(series: DailySeries, spec) -> float:
    """Absolute threshold, or ``"q:<p>"`` for the p-th empirical quantile."""
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("q:"):
            p = float(text[2:])
            if not 0 < p < 1:
                raise ValueError(f"quantile level must be in (0, 1): {p}")
            return float(np.quantile(series.observed, p))
        return float(text)
    return float(spec)
