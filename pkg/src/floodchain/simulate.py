"""Conditional simulation of extremal Markov chains on unit Frechet margins."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .dependence import DependenceModel
from .errors import BracketError, NumericalError
from .likelihood import MarkovModel, censored_z
from .marginal import tail_quantile
from .series import DailySeries

S_TOL = 1e-10  # bracket width in log z, i.e. relative tolerance in z
_S_LO, _S_HI = -50.0, 50.0
_S_MAX = 700.0  # exp stays finite


@dataclass(frozen=True)
class SimConfig:
    n_chains: int = 100
    chain_len: int = 2000
    seed: int = 0
    burn_in: int = 100

    def __post_init__(self):
        if min(self.n_chains, self.chain_len) < 1 or self.burn_in < 0:
            raise ValueError("counts must be positive")
        if self.chain_len <= self.burn_in:
            raise ValueError("chain_len must exceed burn_in")


@dataclass(frozen=True)
class SimulatedChains:
    """Chains after burn-in, shape ``(n_chains, chain_len)``.

    ``values`` is NaN wherever the chain is at or below the threshold; the
    model says nothing about sub-threshold dynamics.
    """

    z: np.ndarray
    exceeds: np.ndarray
    values: np.ndarray
    threshold: float

    @property
    def n_chains(self) -> int:
        return self.z.shape[0]

    def to_series(self, chain: int, fill=None, station_id="sim", start=dt.date(2000, 1, 1)) -> DailySeries:
        """Chain as a daily series with censored days set to ``fill`` (default: the threshold)."""
        fill = self.threshold if fill is None else fill
        return DailySeries(station_id, start, np.where(self.exceeds[chain], self.values[chain], fill))


def _log_conditional(z1, z2, dep: DependenceModel):
    """``log Pr[Z2 <= z2 | Z1 = z1]`` and its derivative in ``log z2``."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v1 = dep.V1(z1, z2)
        v2 = dep.V2(z1, z2)
        v12 = dep.V12(z1, z2)
        logc = dep.log_conditional(z1, z2)
        slope = z2 * (v12 / v1 - v2)
    return logc, slope


def conditional_cdf(z2, z1, dep: DependenceModel):
    """``Pr[Z2 <= z2 | Z1 = z1] = -V1(z1, z2) exp(-V(z1, z2)) / (z1^-2 exp(-1/z1))``."""
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
    logc, _ = _log_conditional(z1, z2, dep)
    c = np.exp(logc)
    c = np.where(np.isnan(c) & (z2 <= 0), 0.0, c)
    if np.any(c > 1 + 1e-9) or np.any(c < -1e-9) or np.any(np.isnan(c)):
        raise NumericalError("conditional cdf outside [0, 1]")
    return np.clip(c, 0.0, 1.0)


def sample_next(z1, dep: DependenceModel, draw):
    """Invert the conditional cdf: ``z2`` with ``Pr[Z2 <= z2 | z1] = draw``.

    Safeguarded Newton iteration on ``log z2`` inside a bracket that is
    tightened at every step; falls back to bisection whenever the Newton step
    leaves the bracket or shrinks more slowly than bisection would.
    Vectorized over ``z1`` and ``draw``.
    """
    z1, draw = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(draw, dtype=float))
    z1 = z1.ravel().copy()
    target = np.log(draw.ravel())
    shape = draw.shape
    # strongly dependent transitions land near z1, so widen around it
    lo = np.minimum(_S_LO, np.log(z1) + _S_LO)
    hi = np.maximum(_S_HI, np.log(z1) + _S_HI)

    def g(s, idx):
        logc, slope = _log_conditional(z1[idx], np.exp(s), dep)
        return logc - target[idx], slope

    # log C carries absolute rounding error of order eps / z1 (from the 1/z1
    # term), so draws that close to 1 are accepted at the upper bracket
    noise = 64 * np.finfo(float).eps * np.maximum(1.0, 1.0 / z1)
    all_idx = np.arange(z1.size)
    glo, _ = g(lo, all_idx)
    for _ in range(8):
        bad = ~(glo < 0)
        if not bad.any():
            break
        lo = np.where(bad, np.maximum(lo - 100.0, -_S_MAX), lo)
        glo, _ = g(lo, all_idx)
    ghi, _ = g(hi, all_idx)
    for _ in range(8):
        bad = ~(ghi >= -noise)
        if not bad.any():
            break
        hi = np.where(bad, np.minimum(hi + 100.0, _S_MAX), hi)
        ghi, _ = g(hi, all_idx)
    failed = ~((glo < 0) & (ghi >= -noise))
    if failed.any():
        i = int(np.flatnonzero(failed)[0])
        raise BracketError(float(z1[i]), float(np.exp(target[i])))

    # independence inverse as the starting point
    s = np.clip(np.log(-1.0 / target), lo, hi)
    dx_old = hi - lo
    dx = dx_old.copy()
    active = np.arange(z1.size)
    for _ in range(200):
        sa = s[active]
        val, slope = g(sa, active)
        neg = val < 0
        lo[active] = np.where(neg, sa, lo[active])
        hi[active] = np.where(neg, hi[active], sa)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = val / slope
            new = sa - step
            # Newton while it stays in the bracket and shrinks faster than bisection
            fast = np.abs(2 * step) <= np.abs(dx_old[active])
        ok = np.isfinite(new) & (new >= lo[active]) & (new <= hi[active]) & fast
        bisect = 0.5 * (lo[active] + hi[active])
        dx_old[active] = dx[active]
        dx[active] = np.where(ok, step, sa - bisect)
        new = np.where(ok, new, bisect)
        new = np.where(val == 0, sa, new)
        done = (np.abs(new - sa) < S_TOL) | (hi[active] - lo[active] < S_TOL) | (val == 0)
        s[active] = new
        active = active[~done]
        if active.size == 0:
            break
    else:
        raise NumericalError("conditional inversion did not converge")
    return np.exp(s).reshape(shape)


def chain_streams(cfg: SimConfig, n_steps: int) -> np.ndarray:
    """Uniform draws, one independent counter-based stream per chain."""
    out = np.empty((cfg.n_chains, n_steps))
    for c in range(cfg.n_chains):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, c])))
        out[c] = rng.random(n_steps)
    # keep draws strictly inside (0, 1)
    return np.clip(out, 1e-300, 1 - 2**-53)


def simulate_frechet(dep: DependenceModel, cfg: SimConfig) -> np.ndarray:
    """Frechet-scale chains after burn-in, shape ``(n_chains, chain_len)``."""
    dep.validate()
    n_steps = cfg.burn_in + cfg.chain_len
    draws = chain_streams(cfg, n_steps)
    z = np.empty_like(draws)
    z[:, 0] = -1.0 / np.log(draws[:, 0])
    for t in range(1, n_steps):
        z[:, t] = sample_next(z[:, t - 1], dep, draws[:, t])
    return z[:, cfg.burn_in :]


def simulate_chain(model: MarkovModel, cfg: SimConfig) -> SimulatedChains:
    """Simulate chains and map them to the data scale.

    A Frechet value ``z`` exceeds the threshold when ``exp(-1/z) > 1 - lam``;
    exceedances are mapped through the GPD quantile function.
    """
    p = model.marginal
    z = simulate_frechet(model.dep, cfg)
    exceeds = z > censored_z(p)
    tail = np.where(exceeds, -np.expm1(-1.0 / z) / p.lam, 1.0)
    values = np.where(exceeds, tail_quantile(np.minimum(tail, 1.0), p), np.nan)
    return SimulatedChains(z, exceeds, values, p.u)
