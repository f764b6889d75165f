"""Censored likelihood of a first-order extremal Markov chain.

Pairs of consecutive days contribute the bivariate extreme-value density
(or its censored versions when a day is at or below the threshold); the
marginal contributions of interior days are divided out.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from .dependence import DependenceModel, start_model
from .errors import (
    ConvergenceError,
    InsufficientData,
    NonPositiveDensity,
    NumericalError,
    SupportExceeded,
)
from .marginal import XI_MIN, GpdParams, fit_gpd_pwm, log_tail, numeric_gradient
from .series import DailySeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkovModel:
    marginal: GpdParams
    dep: DependenceModel
    theta: Optional[float] = None

    def with_theta(self, theta: float) -> "MarkovModel":
        return replace(self, theta=theta)


@dataclass(frozen=True)
class CensoredPoints:
    """Per-observation quantities entering the pair contributions."""

    y: np.ndarray
    censored: np.ndarray
    z: np.ndarray
    log_t: np.ndarray  # log t, 0 where censored
    log_k: np.ndarray  # log |K|, 0 where censored


def censored_z(marginal: GpdParams) -> float:
    if marginal.lam >= 1:
        raise NumericalError("lam = 1 leaves no mass at or below the threshold")
    return -1.0 / math.log1p(-marginal.lam)


def censored_points(y, marginal: GpdParams, strict=True) -> CensoredPoints:
    """Frechet coordinates and the Jacobian terms ``t`` and ``K``.

    Exceedances map to ``z = -1/log F(y)``; values at or below ``u`` are
    censored at ``z_u = -1/log(1 - lam)``. ``|K| = dz/dy``.
    """
    y = np.asarray(y, dtype=float)
    p = marginal
    cens = y <= p.u
    lt = np.where(cens, 0.0, log_tail(np.where(cens, p.u, y) - p.u, p.sigma, p.xi))
    if np.any(np.isneginf(lt)):
        if strict:
            raise SupportExceeded(f"observation beyond upper end point {p.upper_end}")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = np.log1p(-p.lam * np.exp(lt))
        z = np.where(cens, censored_z(p) if p.lam < 1 else 0.0, -1.0 / log_f)
        log_k = np.where(
            cens, 0.0, math.log(p.lam) - math.log(p.sigma) + (1 + p.xi) * lt + 2 * np.log(z) + 1 / z
        )
    return CensoredPoints(y, cens, z, lt, log_k)


def frechet_transform(y, marginal: GpdParams):
    return censored_points(y, marginal).z


def marginal_loglik(y, marginal: GpdParams):
    """Log marginal contribution: GPD log-density above ``u``, ``log(1-lam)`` otherwise."""
    y = np.asarray(y, dtype=float)
    p = marginal
    cens = y <= p.u
    if np.any(cens) and p.lam >= 1:
        raise NumericalError("lam = 1 gives zero probability to censored values")
    lt = log_tail(np.where(cens, p.u, y) - p.u, p.sigma, p.xi)
    if np.any(np.isneginf(lt) & ~cens):
        raise SupportExceeded(f"observation beyond upper end point {p.upper_end}")
    dens = math.log(p.lam) - math.log(p.sigma) + (1 + p.xi) * lt
    cens_term = math.log1p(-p.lam) if p.lam < 1 else -math.inf
    return np.where(cens, cens_term, dens)


def _pair_terms(a: CensoredPoints, b: CensoredPoints, dep: DependenceModel):
    """Log pair contributions and a flag for non-positive densities."""
    z1, z2 = a.z, b.z
    v = dep.V(z1, z2)
    v1 = dep.V1(z1, z2)
    v2 = dep.V2(z1, z2)
    both = ~a.censored & ~b.censored
    first = ~a.censored & b.censored
    second = a.censored & ~b.censored
    with np.errstate(invalid="ignore", divide="ignore"):
        jd = v1 * v2 - dep.V12(z1, z2)
        out = -v
        out = np.where(both, out + np.log(jd) + a.log_k + b.log_k, out)
        out = np.where(first, out + np.log(-v1) + a.log_k, out)
        out = np.where(second, out + np.log(-v2) + b.log_k, out)
    bad = (both & ~(jd > 0)) | (first & ~(v1 < 0)) | (second & ~(v2 < 0))
    return out, bad


def pair_loglik(y1, y2, model: MarkovModel):
    """Log contribution of the consecutive pair ``(y1, y2)``."""
    a = censored_points(y1, model.marginal)
    b = censored_points(y2, model.marginal)
    out, bad = _pair_terms(a, b, model.dep)
    if np.any(bad):
        raise NonPositiveDensity("pair density is not positive for these dependence parameters")
    return out


class ChainData:
    """Pair and interior-point bookkeeping for one window and threshold.

    Pairs straddling a masked day are dropped; a marginal term is removed for
    each day that has a retained pair on both sides.
    """

    def __init__(self, values, u: float, mask=None):
        values = np.asarray(values, dtype=float)
        mask = np.isnan(values) if mask is None else np.asarray(mask, dtype=bool) | np.isnan(values)
        self.u = float(u)
        keep = ~mask[:-1] & ~mask[1:]
        y1, y2 = values[:-1][keep], values[1:][keep]
        self.n_pairs = int(keep.sum())
        active = (y1 > u) | (y2 > u)
        self.y1, self.y2 = y1[active], y2[active]
        self.n_censored_pairs = int(np.count_nonzero(~active))
        interior = np.zeros(values.size, dtype=bool)
        interior[1:-1] = keep[:-1] & keep[1:]
        yi = values[interior]
        self.interior_exceed = yi[yi > u]
        self.n_interior_censored = int(np.count_nonzero(yi <= u))
        observed = values[~mask]
        self.n_observed = observed.size
        self.n_exceed = int(np.count_nonzero(observed > u))
        self.exceedances = observed[observed > u]

    @classmethod
    def from_series(cls, series: DailySeries, u: float) -> "ChainData":
        return cls(series.values, u, series.mask)

    def loglik(self, marginal: GpdParams, dep: DependenceModel, strict=True) -> float:
        p = marginal
        a = censored_points(self.y1, p, strict=strict)
        b = censored_points(self.y2, p, strict=strict)
        if not strict and (np.any(np.isneginf(a.log_t)) or np.any(np.isneginf(b.log_t))):
            return -math.inf
        terms, bad = _pair_terms(a, b, dep)
        if np.any(bad):
            if strict:
                raise NonPositiveDensity("pair density is not positive for these dependence parameters")
            return -math.inf
        total = float(np.sum(terms))
        if self.n_censored_pairs:
            zu = censored_z(p)
            total -= self.n_censored_pairs * float(dep.V(zu, zu))
        lt = log_tail(self.interior_exceed - p.u, p.sigma, p.xi)
        marg = self.interior_exceed.size * (math.log(p.lam) - math.log(p.sigma)) + (1 + p.xi) * float(np.sum(lt))
        if self.n_interior_censored:
            marg += self.n_interior_censored * math.log1p(-p.lam)
        return total - marg


def _as_values(window):
    if isinstance(window, DailySeries):
        return window.values, window.mask
    return np.asarray(window, dtype=float), None


def chain_loglik(window, model: MarkovModel) -> float:
    values, mask = _as_values(window)
    data = ChainData(values, model.marginal.u, mask)
    if data.n_observed < 3:
        raise InsufficientData("need at least 3 observed values")
    return data.loglik(model.marginal, model.dep)


@dataclass
class FitReport:
    model: MarkovModel
    loglik: float
    n_iter: int
    n_eval: int
    converged: bool
    simplex_spread: float  # max |f_i - f_best| over the final simplex
    n_exceed: int
    n_observed: int
    restarts: list = field(default_factory=list)


def _pack(marginal: GpdParams, dep: DependenceModel) -> np.ndarray:
    return np.concatenate([[math.log(marginal.sigma), marginal.xi], dep.to_vector()])


def fit_markov(
    window,
    u: float,
    family="amix",
    seed: int = 0,
    n_restarts: int = 3,
    tol: float = 1e-8,
    maxiter: int = 4000,
    min_exceedances: int = 10,
) -> FitReport:
    """Maximum censored likelihood fit of a Markov chain model.

    ``lam`` is fixed at the empirical exceedance rate; ``sigma``, ``xi`` and
    the dependence parameters are optimized with Nelder-Mead over their
    unconstrained parameterization, from the PWM marginal fit and a
    mid-domain dependence model plus ``n_restarts`` seeded perturbations.
    ``family`` is a family name or a template model (e.g. a ``combo``).
    """
    values, mask = _as_values(window)
    data = ChainData(values, u, mask)
    if data.n_exceed < min_exceedances:
        raise InsufficientData(f"need at least {min_exceedances} exceedances, got {data.n_exceed}")
    if np.ptp(data.exceedances) == 0:
        raise InsufficientData("degenerate window: all exceedances equal")
    lam = data.n_exceed / data.n_observed
    if lam >= 1:
        raise InsufficientData("every observed value exceeds the threshold")

    template = start_model(family) if isinstance(family, str) else family
    try:
        pwm = fit_gpd_pwm(data.exceedances, u, lam=lam)
        sigma0, xi0 = pwm.sigma, float(np.clip(pwm.xi, -0.4, 0.4))
    except NumericalError:
        sigma0, xi0 = float(np.mean(data.exceedances - u)), 0.0
    if xi0 < 0 and np.max(data.exceedances) - u >= -sigma0 / xi0:
        xi0 = 0.0
    x0 = np.concatenate([[math.log(sigma0), xi0], np.zeros(template.n_params)])

    def unpack(par):
        return GpdParams(u, lam, math.exp(par[0]), float(par[1])), template.with_vector(par[2:])

    def objective(par):
        if not np.all(np.isfinite(par)) or par[1] <= XI_MIN or abs(par[0]) > 700:
            return math.inf
        marginal, dep = unpack(par)
        if not dep.is_valid:
            return math.inf
        ll = data.loglik(marginal, dep, strict=False)
        return -ll if np.isfinite(ll) else math.inf

    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 + rng.normal(0.0, 0.5, x0.size) for _ in range(n_restarts)]
    opts = {"xatol": tol, "fatol": tol, "maxiter": maxiter, "maxfev": 2 * maxiter, "adaptive": x0.size > 3}
    runs = []
    for s in starts:
        if not np.isfinite(objective(s)):
            continue
        res = optimize.minimize(objective, s, method="Nelder-Mead", options=opts)
        runs.append(res)
    if not runs:
        raise InsufficientData("no feasible starting point for the likelihood")
    best = min(runs, key=lambda r: r.fun)
    # polish: restart the simplex at the incumbent until it stops improving
    n_iter = sum(r.nit for r in runs)
    n_eval = sum(r.nfev for r in runs)
    for _ in range(5):
        res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=opts)
        n_iter += res.nit
        n_eval += res.nfev
        improved = res.fun < best.fun - tol
        if res.fun <= best.fun:
            best = res
        if not improved:
            break

    if not np.isfinite(best.fun) or not best.success:
        g = numeric_gradient(objective, best.x)
        raise ConvergenceError("censored likelihood maximization failed", best.x, -best.fun, float(np.linalg.norm(g)))

    marginal, dep = unpack(best.x)
    model = MarkovModel(marginal, dep)
    loglik = data.loglik(marginal, dep, strict=True)  # raises NonPositiveDensity at a bad optimum
    spread = float(np.max(np.abs(best.final_simplex[1] - best.fun)))
    return FitReport(
        model=model,
        loglik=loglik,
        n_iter=n_iter,
        n_eval=n_eval,
        converged=bool(best.success),
        simplex_spread=spread,
        n_exceed=data.n_exceed,
        n_observed=data.n_observed,
        restarts=[float(-r.fun) for r in runs],
    )
