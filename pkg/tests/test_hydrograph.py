import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodchain.dependence import Logistic, independence_model
from floodchain.hydrograph import (
    EventSet,
    NormalizedHydrograph,
    d_mean,
    d_med,
    duration_above,
    durations,
    extract_annual_events,
    mean_curve,
    simulated_durations,
)
from floodchain.likelihood import MarkovModel
from floodchain.marginal import GpdParams
from floodchain.series import DailySeries
from floodchain.simulate import SimConfig

W = 15


def event(values):
    v = np.asarray(values, dtype=float)
    return NormalizedHydrograph(W, v / v.max(), int(np.argmax(v)), 2000)


def test_flat_curve_lasts_whole_window():
    assert duration_above(np.ones(2 * W + 1)) == 2 * W + 1


def test_triangle_lasts_half_width():
    t = 1 - np.abs(np.arange(-W, W + 1)) / W
    assert duration_above(t) == pytest.approx(W, rel=1e-14)


def test_single_spike_lasts_one_day():
    c = np.zeros(2 * W + 1)
    c[W] = 1.0
    assert duration_above(c) == pytest.approx(1.0, rel=1e-14)


def test_curve_below_half_has_no_duration():
    assert duration_above(np.full(2 * W + 1, 0.4)) == 0.0


def test_level_reached_at_neighbours():
    # the interpolated curve reaches one half at the centres of days 1 and 3
    c = np.full(5, 0.5)
    c[2] = 1.0
    assert duration_above(c) == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=2 * W + 1, max_size=2 * W + 1), st.floats(0.1, 1e3))
def test_duration_bounded_and_scale_invariant(vals, scale):
    ev = event(vals)
    d = duration_above(ev.values)
    assert 0 < d <= 2 * W + 1
    scaled = event(np.asarray(vals) * scale)
    assert duration_above(scaled.values) == pytest.approx(d, rel=1e-9, abs=1e-9)


def test_median_resists_an_outlier_mean_does_not():
    spike = np.zeros(2 * W + 1)
    spike[W] = 1.0
    evs = [event(spike + 1e-3 * i) for i in range(1, 3)]
    with_outlier = evs + [event(np.ones(2 * W + 1))]
    assert d_med(with_outlier) == pytest.approx(d_med(evs), abs=0.01)
    assert np.mean(durations(with_outlier)) > 5 * np.mean(durations(evs))
    assert durations(with_outlier).size == 3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=2 * W + 1, max_size=2 * W + 1))
def test_singleton_set_summaries_equal_its_duration(vals):
    ev = event(vals)
    d = duration_above(ev.values)
    assert d_mean([ev]) == pytest.approx(d, rel=1e-12)
    assert d_med([ev]) == d


def _series(values, start=dt.date(2001, 1, 1)):
    return DailySeries("h", start, values)


def test_extraction_drops_masked_years_and_edges():
    rng = np.random.default_rng(0)
    y = rng.uniform(1, 2, 4 * 365 + 1)  # 2001-2004, 2004 is a leap year
    y[200] = 50.0  # peak of 2001
    y[365 + 3] = 50.0  # peak of 2002 close to the start of its year
    y[3 * 365 + 10] = np.nan  # 2004 has a gap
    evs = extract_annual_events(_series(y))
    assert [e.year for e in evs.events] == [2001, 2002, 2003]
    assert evs.n_dropped == 1
    assert evs.events[0].values[W] == 1.0
    assert evs.events[0].values.size == 2 * W + 1
    first = extract_annual_events(_series(y[:365]))
    y2 = y.copy()
    y2[5] = 80.0  # window would start before the record
    assert len(extract_annual_events(_series(y2[:365]))) == 0
    assert len(first) == 1


def test_constant_series_is_flat():
    # ties put each year's peak on its first day; the first window leaves the record
    evs = extract_annual_events(_series(np.full(3 * 365, 4.0)))
    assert len(evs) == 2 and evs.n_dropped == 1
    assert d_mean(evs) == 2 * W + 1
    np.testing.assert_array_equal(mean_curve(evs), 1.0)


def test_empty_sets_raise():
    with pytest.raises(ValueError):
        d_med(EventSet([], 0))
    with pytest.raises(ValueError):
        mean_curve([])


def _model(dep):
    # a threshold small against the scale keeps the below-threshold floor u / peak low
    return MarkovModel(GpdParams(0.1, 0.05, 10.0, 0.0), dep)


def test_independent_chains_give_short_events():
    s = simulated_durations(_model(independence_model("log")), SimConfig(10, 3700, 1))
    assert s.d_med < 1.5
    assert s.d_mean < 2.0
    assert s.n_events > 80


def test_durations_grow_with_dependence():
    cfg = SimConfig(10, 3700, 2)
    d = [simulated_durations(_model(Logistic(a)), cfg).d_mean for a in (0.9, 0.5, 0.2)]
    assert d[0] < d[1] < d[2]


def test_simulated_durations_deterministic():
    cfg = SimConfig(3, 1200, 5)
    a = simulated_durations(_model(Logistic(0.5)), cfg)
    b = simulated_durations(_model(Logistic(0.5)), cfg)
    assert a.d_mean == b.d_mean and a.d_med == b.d_med
