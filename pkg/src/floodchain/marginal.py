"""Generalized Pareto marginal above a threshold and its estimators.

The parameterization is ``F(y) = 1 - lam * (1 + xi (y - u) / sigma)_+^(-1/xi)``
for ``y >= u``; positive ``xi`` means a heavy tail.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import BelowThreshold, ConvergenceError, DegenerateMoments, InsufficientData

XI_ZERO = 1e-8
XI_MIN = -1.0


@dataclass(frozen=True)
class GpdParams:
    u: float
    lam: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.lam <= 1:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")

    @property
    def upper_end(self) -> float:
        return self.u - self.sigma / self.xi if self.xi < -XI_ZERO else math.inf

    def replace(self, **kw) -> "GpdParams":
        d = dict(u=self.u, lam=self.lam, sigma=self.sigma, xi=self.xi)
        d.update(kw)
        return GpdParams(**d)


@dataclass(frozen=True)
class GpdFit:
    params: GpdParams
    cov: np.ndarray  # observed-information covariance of (sigma, xi)
    loglik: float
    n: int


def log_tail(excess, sigma, xi):
    """``log t`` with ``t = (1 + xi * excess / sigma)_+^(-1/xi)``; -inf beyond the support."""
    excess = np.asarray(excess, dtype=float)
    if abs(xi) < XI_ZERO:
        return -excess / sigma
    arg = xi * excess / sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.log1p(arg) / xi
    return np.where(arg > -1, out, -np.inf)


def _check_above(y, p):
    y = np.asarray(y, dtype=float)
    if np.any(y < p.u):
        raise BelowThreshold(f"value below threshold u={p.u}")
    return y


def gpd_cdf(y, p: GpdParams):
    y = _check_above(y, p)
    return 1.0 - p.lam * np.exp(log_tail(y - p.u, p.sigma, p.xi))


def gpd_pdf(y, p: GpdParams):
    """Density of the upper branch; integrates to ``lam`` over ``[u, inf)``."""
    y = _check_above(y, p)
    lt = log_tail(y - p.u, p.sigma, p.xi)
    with np.errstate(invalid="ignore"):
        dens = p.lam / p.sigma * np.exp((1 + p.xi) * lt)
    return np.where(np.isneginf(lt), 0.0, dens)


def gpd_quantile(prob, p: GpdParams):
    prob = np.asarray(prob, dtype=float)
    # tolerate the rounding in 1 - lam
    if np.any(prob < 1 - p.lam - 1e-15) or np.any(prob >= 1):
        raise BelowThreshold("probability outside [1 - lam, 1)")
    tail = np.minimum((1.0 - prob) / p.lam, 1.0)
    return tail_quantile(tail, p)


def tail_quantile(tail, p: GpdParams):
    """Value whose conditional exceedance probability above ``u`` is ``tail``."""
    tail = np.asarray(tail, dtype=float)
    if abs(p.xi) < XI_ZERO:
        return p.u - p.sigma * np.log(tail)
    return p.u + p.sigma / p.xi * np.expm1(-p.xi * np.log(tail))


def gpd_loglik(excess, sigma, xi) -> float:
    """GPD log-likelihood of threshold excesses (no rate term)."""
    if sigma <= 0 or xi <= XI_MIN:
        return -math.inf
    lt = log_tail(excess, sigma, xi)
    if np.any(np.isneginf(lt)):
        return -math.inf
    return float(np.sum((1 + xi) * lt) - excess.size * math.log(sigma))


def _excesses(values, u, minimum):
    x = np.asarray(values, dtype=float) - u
    if x.size < minimum:
        raise InsufficientData(f"need at least {minimum} exceedances, got {x.size}")
    if np.any(x < 0):
        raise BelowThreshold("exceedance below threshold")
    if np.ptp(x) == 0:
        raise InsufficientData("degenerate sample: all exceedances equal")
    return x


def fit_gpd_pwm(values, u, biased=False, lam=1.0, plotting_offset=0.65) -> GpdParams:
    """Probability weighted moment estimator of (sigma, xi).

    Excesses are sorted in decreasing order so that the weighted moment
    ``b1`` estimates ``E[X (1 - F(X))]``. Unbiased weights are
    ``(i-1)/((n-1) n)``; biased ones use the plotting position
    ``(i - plotting_offset)/n``.
    """
    x = np.sort(np.asarray(values, dtype=float) - u)[::-1]
    n = x.size
    if n < 2:
        raise InsufficientData(f"need at least 2 exceedances, got {n}")
    i = np.arange(1, n + 1)
    if biased:
        w = (i - plotting_offset) / n / n
    else:
        w = (i - 1) / ((n - 1) * n)
    b0 = x.mean()
    b1 = float(np.sum(w * x))
    denom = b0 - 2 * b1
    if abs(denom) <= 1e-12 * max(abs(b0), 1e-300):
        raise DegenerateMoments("b0 == 2 b1")
    xi = 2 - b0 / denom
    sigma = 2 * b0 * b1 / denom
    if xi >= 0.5:
        warnings.warn(f"PWM shape estimate {xi:.3f} >= 0.5 lies outside the estimator's validity range")
    if sigma <= 0:
        raise DegenerateMoments(f"non-positive scale estimate {sigma}")
    if xi < -XI_ZERO and x[0] >= -sigma / xi:
        warnings.warn("PWM fit places observations beyond the upper end point")
    return GpdParams(u, lam, sigma, xi)


def _hessian(f, x, rel_step=1e-4):
    x = np.asarray(x, dtype=float)
    k = x.size
    h = rel_step * np.maximum(np.abs(x), 1.0)
    hess = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            ea = np.zeros(k)
            eb = np.zeros(k)
            ea[a] = h[a]
            eb[b] = h[b]
            val = (f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)) / (4 * h[a] * h[b])
            hess[a, b] = hess[b, a] = val
    return hess


def numeric_gradient(f, x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for a in range(x.size):
        h = rel_step * max(abs(x[a]), 1.0)
        e = np.zeros_like(x)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fit_gpd_mle(values, u, lam=1.0, xi=None, tol=1e-9, n_restarts=2) -> GpdFit:
    """Maximum likelihood fit of the GPD to threshold exceedances.

    Nelder-Mead on ``(log sigma, xi)`` started from the unbiased PWM
    estimate, restarted from the incumbent until the log-likelihood stops
    improving. Passing ``xi`` fixes the shape and optimizes the scale only.
    """
    x = _excesses(values, u, minimum=5)

    if xi is not None:
        res = optimize.minimize_scalar(
            lambda ls: -gpd_loglik(x, math.exp(ls), xi),
            bracket=(math.log(x.mean()) - 1, math.log(x.mean()) + 1),
            tol=1e-12,
        )
        sigma = math.exp(res.x)
        info = -_hessian(lambda s: gpd_loglik(x, s[0], xi), [sigma])
        return GpdFit(GpdParams(u, lam, sigma, xi), np.linalg.pinv(info), -float(res.fun), x.size)

    try:
        start = fit_gpd_pwm(values, u)
        x0 = np.array([math.log(start.sigma), min(max(start.xi, -0.5), 0.5)])
    except (DegenerateMoments, InsufficientData):
        x0 = np.array([math.log(x.mean()), 0.0])
    if not np.isfinite(gpd_loglik(x, math.exp(x0[0]), x0[1])):
        x0 = np.array([math.log(x.mean()), 0.0])

    def objective(par):
        return -gpd_loglik(x, math.exp(par[0]), par[1])

    best = None
    for _ in range(n_restarts + 1):
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": tol, "maxiter": 4000},
        )
        if best is not None and res.fun > best.fun - tol:
            best = res if res.fun < best.fun else best
            break
        best = res
        x0 = res.x
    if not best.success or not np.isfinite(best.fun):
        g = numeric_gradient(objective, best.x)
        raise ConvergenceError("GPD likelihood maximization failed", best.x, -best.fun, float(np.linalg.norm(g)))

    sigma, xi_hat = math.exp(best.x[0]), float(best.x[1])
    info = -_hessian(lambda s: gpd_loglik(x, s[0], s[1]), [sigma, xi_hat])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
    return GpdFit(GpdParams(u, lam, sigma, xi_hat), cov, -float(best.fun), x.size)
