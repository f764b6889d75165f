from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from floodchain.dependence import AsymMixed
from floodchain.likelihood import MarkovModel
from floodchain.marginal import GpdParams
from floodchain.series import DailySeries
from floodchain.simulate import SimConfig, simulate_chain


def simulated_series(model, n_days, seed, station_id="sim", floor=0.3, start=dt.date(1990, 1, 1)):
    """Observed-looking series: chain exceedances plus uniform noise below ``u``."""
    sims = simulate_chain(model, SimConfig(1, n_days, seed, 100))
    rng = np.random.default_rng(seed + 1000)
    u = model.marginal.u
    below = u * rng.uniform(floor, 1.0, n_days)
    values = np.where(sims.exceeds[0], sims.values[0], below)
    return DailySeries(station_id, start, values)


def write_csv(path, series: DailySeries):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,discharge\n")
        for d, v in zip(series.dates(), series.values):
            fh.write(f"{d.isoformat()},{'' if np.isnan(v) else repr(float(v))}\n")
    return path


@pytest.fixture(scope="session")
def amix_model():
    return MarkovModel(GpdParams(10.0, 0.1, 1.0, 0.1), AsymMixed(0.3, 0.2))


@pytest.fixture(scope="session")
def station(amix_model):
    """Twelve years of synthetic daily discharge."""
    return simulated_series(amix_model, int(12 * 365.25), seed=7, station_id="st0")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
