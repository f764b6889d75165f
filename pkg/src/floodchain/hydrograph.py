"""Flood duration from annual-maximum hydrographs normalized by their peak.

A duration is the length of time a normalized hydrograph stays above one
half. Daily values are treated as the centres of unit-width days and
joined by straight lines, so a curve that never drops below one half lasts
``2W + 1`` days and an isolated one-day spike lasts one day.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .likelihood import MarkovModel
from .series import DailySeries, year_start
from .simulate import SimConfig, simulate_chain

HALF_WIDTH = 15
LEVEL = 0.5


@dataclass(frozen=True)
class NormalizedHydrograph:
    half_width: int
    values: np.ndarray  # 2W + 1 ratios to the peak, peak in the middle
    peak_index: int
    year: int


@dataclass(frozen=True)
class EventSet:
    events: list
    n_dropped: int

    def __len__(self):
        return len(self.events)


def _cut_events(values, mask, year_bounds, half_width):
    events, dropped = [], 0
    n = values.size
    for year, (a, b) in year_bounds:
        block = values[a:b]
        if mask[a:b].any():
            dropped += 1
            continue
        peak = a + int(np.argmax(block))
        lo, hi = peak - half_width, peak + half_width + 1
        if lo < 0 or hi > n or mask[lo:hi].any() or not values[peak] > 0:
            dropped += 1
            continue
        ratios = values[lo:hi] / values[peak]
        events.append(NormalizedHydrograph(half_width, ratios, peak, year))
    return EventSet(events, dropped)


def _calendar_years(series: DailySeries):
    """``(year, (first, stop))`` for every calendar year fully inside the series."""
    start = series.start_date
    last = start + dt.timedelta(days=len(series) - 1)
    out = []
    for year in range(start.year, last.year + 1):
        a = (dt.date(year, 1, 1) - start).days
        b = (dt.date(year, 12, 31) - start).days + 1
        if a >= 0 and b <= len(series):
            out.append((year, (a, b)))
    return out


def extract_annual_events(series: DailySeries, half_width: int = HALF_WIDTH) -> EventSet:
    """Hydrograph around each calendar year's maximum, divided by the peak.

    Years with any missing day, whose window leaves the record or touches
    missing data, or with a zero peak, are dropped and counted.
    """
    if half_width < 0:
        raise ValueError("half_width must be non-negative")
    return _cut_events(series.values, series.mask, _calendar_years(series), half_width)


def duration_above(curve, level: float = LEVEL) -> float:
    """Days during which the interpolated curve exceeds ``level``."""
    c = np.asarray(curve, dtype=float)
    above = c > level
    total = 0.5 * above[0] + 0.5 * above[-1]
    a, b = c[:-1], c[1:]
    both = above[:-1] & above[1:]
    total += float(np.count_nonzero(both))
    cross = above[:-1] != above[1:]
    hi = np.where(above[:-1], a, b)[cross]
    lo = np.where(above[:-1], b, a)[cross]
    total += float(np.sum((hi - level) / (hi - lo)))
    return total


def mean_curve(events) -> np.ndarray:
    evs = events.events if isinstance(events, EventSet) else events
    if not evs:
        raise ValueError("no hydrographs")
    return np.mean([e.values for e in evs], axis=0)


def d_mean(events) -> float:
    """Duration above one half of the pointwise mean hydrograph."""
    return duration_above(mean_curve(events))


def durations(events) -> np.ndarray:
    evs = events.events if isinstance(events, EventSet) else events
    return np.array([duration_above(e.values) for e in evs])


def d_med(events) -> float:
    """Median of the per-event durations."""
    d = durations(events)
    if d.size == 0:
        raise ValueError("no hydrographs")
    return float(np.median(d))


@dataclass(frozen=True)
class DurationSummary:
    d_mean: float
    d_med: float
    curve: np.ndarray
    n_events: int
    n_dropped: int


def summarize(events: EventSet) -> DurationSummary:
    return DurationSummary(d_mean(events), d_med(events), mean_curve(events), len(events), events.n_dropped)


def simulated_durations(
    model: MarkovModel, cfg: SimConfig = SimConfig(), half_width: int = HALF_WIDTH
) -> DurationSummary:
    """Durations of annual events in chains simulated from ``model``.

    Years are consecutive blocks of 365.25 steps. Steps at or below the
    threshold take the threshold value, so their ratio to the peak is a
    floor ``u / peak``. Years without an exceedance have no flood and are
    dropped.
    """
    sims = simulate_chain(model, cfg)
    u = sims.threshold
    n_years = 0
    while year_start(n_years + 1) <= cfg.chain_len:
        n_years += 1
    bounds = [(k, (year_start(k), year_start(k + 1))) for k in range(n_years)]
    events, dropped = [], 0
    for c in range(sims.n_chains):
        values = np.where(sims.exceeds[c], sims.values[c], u)
        mask = np.zeros(values.size, dtype=bool)
        keep = [(k, ab) for k, ab in bounds if sims.exceeds[c, ab[0] : ab[1]].any()]
        dropped += len(bounds) - len(keep)
        ev = _cut_events(values, mask, keep, half_width)
        events.extend(ev.events)
        dropped += ev.n_dropped
    if not events:
        raise ValueError("no simulated year produced a usable event")
    return summarize(EventSet(events, dropped))
