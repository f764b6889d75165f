"""Empirical extremal dependence between consecutive days.

``chi(w)`` and ``chibar(w)`` are estimated from ranks of lag-one pairs;
intervals come from a moving-block bootstrap over those pairs. The sample
autocorrelation and partial autocorrelation functions help judge whether
a first-order chain is adequate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientData, NumericalError
from .series import DailySeries

MIN_PAIRS = 50
TABLE_OMEGAS = (0.98, 0.985, 0.99)


def _values(window):
    if isinstance(window, DailySeries):
        return np.asarray(window.values, dtype=float)
    return np.asarray(window, dtype=float)


def lagged_pairs(window, lag: int = 1) -> np.ndarray:
    """``(y[t - lag], y[t])`` for all t with both days observed, shape ``(m, 2)``."""
    y = _values(window)
    a, b = y[:-lag], y[lag:]
    keep = ~np.isnan(a) & ~np.isnan(b)
    return np.column_stack([a[keep], b[keep]])


def _uniform_ranks(pairs: np.ndarray):
    m = pairs.shape[0]
    if m < MIN_PAIRS:
        raise InsufficientData(f"need at least {MIN_PAIRS} observed pairs, got {m}")
    u1 = rankdata(pairs[:, 0]) / (m + 1)
    u2 = rankdata(pairs[:, 1]) / (m + 1)
    return u1, u2


def _check_omega(omega):
    if not 0 < omega < 1:
        raise ValueError(f"omega must lie in (0, 1), got {omega}")


def chi_pairs(pairs, omega: float) -> float:
    """``2 - log C(w, w) / log w`` with ``C`` the empirical copula of the pairs."""
    _check_omega(omega)
    u1, u2 = _uniform_ranks(np.asarray(pairs, dtype=float))
    p = np.mean((u1 <= omega) & (u2 <= omega))
    if p == 0:
        raise NumericalError(f"no joint non-exceedance at omega={omega}")
    return 2.0 - math.log(p) / math.log(omega)


def chibar_pairs(pairs, omega: float) -> float:
    """``2 log(1 - w) / log S(w, w) - 1`` with ``S`` the empirical joint survival."""
    _check_omega(omega)
    u1, u2 = _uniform_ranks(np.asarray(pairs, dtype=float))
    s = np.mean((u1 > omega) & (u2 > omega))
    if s == 0:
        raise NumericalError(f"no joint exceedance at omega={omega}")
    if s == 1:
        raise NumericalError(f"every pair exceeds omega={omega}")
    return 2.0 * math.log1p(-omega) / math.log(s) - 1.0


def chi_empirical(window, omega: float) -> float:
    return chi_pairs(lagged_pairs(window), omega)


def chibar_empirical(window, omega: float) -> float:
    return chibar_pairs(lagged_pairs(window), omega)


def chi_bounds(omega):
    """Range attainable by ``chi(w)``: ``[2 - log(max(2w - 1, 0)) / log w, 1]``."""
    omega = np.asarray(omega, dtype=float)
    with np.errstate(divide="ignore"):
        lower = 2.0 - np.log(np.maximum(2 * omega - 1, 0.0)) / np.log(omega)
    return lower, np.ones_like(omega)


CHIBAR_BOUNDS = (-1.0, 1.0)


def block_bootstrap_ci(
    data,
    statistic: Callable,
    block_len: int = 30,
    n_boot: int = 500,
    level: float = 0.95,
    seed: int = 0,
    bounds=(-math.inf, math.inf),
):
    """Percentile interval from a moving-block bootstrap.

    Contiguous blocks of ``data`` rows are drawn with replacement and
    concatenated to the original length; ``statistic`` is re-evaluated on
    each resample. The interval is clipped to ``bounds``. Replicates where
    the statistic raises are discarded; more than 20% of them is an error.
    """
    data = np.asarray(data)
    n = data.shape[0]
    if block_len < 2:
        raise ValueError("block_len must be >= 2")
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    block_len = min(block_len, n)
    rng = np.random.default_rng(seed)
    n_blocks = -(-n // block_len)
    offsets = np.arange(block_len)
    stats = []
    failures = 0
    for _ in range(n_boot):
        starts = rng.integers(0, n - block_len + 1, n_blocks)
        idx = (starts[:, None] + offsets).ravel()[:n]
        try:
            stats.append(statistic(data[idx]))
        except (NumericalError, ValueError, ZeroDivisionError):
            failures += 1
    if failures > 0.2 * n_boot:
        raise NumericalError(f"statistic failed on {failures} of {n_boot} bootstrap replicates")
    tail = (1 - level) / 2
    lo, hi = np.quantile(stats, [tail, 1 - tail])
    lo_b, hi_b = bounds
    return float(np.clip(lo, lo_b, hi_b)), float(np.clip(hi, lo_b, hi_b))


@dataclass(frozen=True)
class ChiCurve:
    omegas: np.ndarray
    chi: np.ndarray
    chi_lower: np.ndarray
    chi_upper: np.ndarray
    chibar: np.ndarray
    chibar_lower: np.ndarray
    chibar_upper: np.ndarray
    bound_lower: np.ndarray
    bound_upper: np.ndarray
    n_boot: int
    block_len: int
    level: float

    def rows(self):
        """Plot-ready rows, one per omega."""
        cols = (
            self.omegas, self.chi, self.chi_lower, self.chi_upper, self.chibar,
            self.chibar_lower, self.chibar_upper, self.bound_lower, self.bound_upper,
        )
        return [tuple(float(c[i]) for c in cols) for i in range(self.omegas.size)]


CURVE_COLUMNS = ("omega", "chi", "chi_lo", "chi_hi", "chibar", "chibar_lo", "chibar_hi", "bound_lo", "bound_hi")


def _safe(stat, pairs, omega):
    try:
        return stat(pairs, omega)
    except NumericalError:
        return math.nan


def chi_curve(window, omegas, block_len=30, n_boot=500, level=0.95, seed=0) -> ChiCurve:
    """``chi`` and ``chibar`` over a grid of levels with bootstrap intervals.

    Levels where a statistic (or its bootstrap) cannot be computed are NaN.
    Every level uses the same bootstrap stream.
    """
    pairs = lagged_pairs(window)
    if pairs.shape[0] < MIN_PAIRS:
        raise InsufficientData(f"need at least {MIN_PAIRS} observed pairs, got {pairs.shape[0]}")
    omegas = np.asarray(omegas, dtype=float)
    b_lo, b_hi = chi_bounds(omegas)
    out = {k: np.full(omegas.size, np.nan) for k in ("chi", "chi_lo", "chi_hi", "cb", "cb_lo", "cb_hi")}
    for i, w in enumerate(omegas):
        out["chi"][i] = _safe(chi_pairs, pairs, w)
        out["cb"][i] = _safe(chibar_pairs, pairs, w)
        try:
            out["chi_lo"][i], out["chi_hi"][i] = block_bootstrap_ci(
                pairs, lambda d: chi_pairs(d, w), block_len, n_boot, level, seed, (b_lo[i], b_hi[i])
            )
        except NumericalError:
            pass
        try:
            out["cb_lo"][i], out["cb_hi"][i] = block_bootstrap_ci(
                pairs, lambda d: chibar_pairs(d, w), block_len, n_boot, level, seed, CHIBAR_BOUNDS
            )
        except NumericalError:
            pass
    return ChiCurve(
        omegas, out["chi"], out["chi_lo"], out["chi_hi"], out["cb"], out["cb_lo"], out["cb_hi"],
        b_lo, b_hi, n_boot, block_len, level,
    )


def chi_table(window, omegas=TABLE_OMEGAS, **kw) -> list[tuple]:
    """``(omega, chi, lower, upper)`` rows at the tabulated levels."""
    curve = chi_curve(window, omegas, **kw)
    return [(float(w), float(c), float(lo), float(hi)) for w, c, lo, hi in zip(
        curve.omegas, curve.chi, curve.chi_lower, curve.chi_upper)]


def acf(window, max_lag: int) -> np.ndarray:
    """Sample autocorrelations ``r_0..r_max_lag``; pairs touching a missing day are skipped.

    Lag-k covariances are normalized by the number of observed days, as in
    the usual biased estimator, so the sequence is positive semi-definite
    when nothing is missing.
    """
    y = _values(window)
    obs = ~np.isnan(y)
    n = int(obs.sum())
    if max_lag < 0 or max_lag >= n / 4:
        raise ValueError(f"max_lag must lie in [0, n/4) with n={n}")
    d = np.where(obs, y - np.nanmean(y), 0.0)
    c0 = float(np.dot(d, d)) / n
    if c0 == 0:
        raise NumericalError("constant series has no autocorrelation")
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = float(np.dot(d[:-k], d[k:])) / n / c0
    return r


def pacf_from_acf(r) -> np.ndarray:
    """Partial autocorrelations by the Durbin-Levinson recursion; entry 0 is 1."""
    r = np.asarray(r, dtype=float)
    p = r.size - 1
    out = np.empty(p + 1)
    out[0] = 1.0
    phi = np.zeros(p + 1)
    v = 1.0
    for k in range(1, p + 1):
        a = (r[k] - np.dot(phi[1:k], r[k - 1 : 0 : -1])) / v
        new = phi.copy()
        new[k] = a
        new[1:k] = phi[1:k] - a * phi[k - 1 : 0 : -1]
        phi = new
        v *= 1 - a * a
        out[k] = a
    return out


def acf_pacf(window, max_lag: int):
    r = acf(window, max_lag)
    return r, pacf_from_acf(r)
