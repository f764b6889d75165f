"""Parametric bivariate extreme-value dependence families.

Each model exposes the exponent measure ``V(x, y)`` on unit Frechet margins,
its partial derivatives ``V1``, ``V2``, the mixed derivative ``V12`` and the
Pickands dependence function ``A(w)`` with ``w = x / (x + y)``, so that
``V(x, y) = (1/x + 1/y) A(x / (x + y))``.

Families: ``log`` (logistic), ``nlog`` (negative logistic), ``mix``
(mixed), their asymmetric versions ``alog``, ``anlog``, ``amix`` and
``combo``, a fixed-weight convex combination of two models.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import ClassVar

import numpy as np
from scipy.special import expit

from .errors import ConstraintViolation

FAMILIES = ("log", "nlog", "mix", "alog", "anlog", "amix")
ALPHA_MIN = 1e-6  # logistic types: alpha -> 0 is perfect dependence
ALPHA_MAX = 1e6  # negative logistic types: alpha -> inf is perfect dependence
_CLAMP = 1e-12


def _logit(p):
    p = np.clip(p, _CLAMP, 1 - _CLAMP)
    return np.log(p) - np.log1p(-p)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def _exp_or_zero(log_coef, rest):
    """``exp(log_coef + rest)`` that is 0 whenever ``log_coef`` is -inf."""
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.exp(log_coef + rest)
    return np.where(np.isneginf(log_coef), 0.0, val)


def _xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.broadcast_arrays(x, y)


class DependenceModel(ABC):
    family: ClassVar[str]

    @abstractmethod
    def V(self, x, y): ...

    @abstractmethod
    def V1(self, x, y): ...

    @abstractmethod
    def V12(self, x, y): ...

    @abstractmethod
    def _pickands(self, w): ...

    @abstractmethod
    def constraints(self) -> list[tuple[str, bool]]: ...

    @abstractmethod
    def to_vector(self) -> np.ndarray: ...

    @abstractmethod
    def with_vector(self, vec) -> "DependenceModel": ...

    @abstractmethod
    def params(self) -> dict: ...

    def V2(self, x, y):
        return self.swapped().V1(y, x)

    def swapped(self) -> "DependenceModel":
        """Model with the roles of the two coordinates exchanged."""
        return self

    def log_conditional(self, x, y):
        """``log Pr[Z2 <= y | Z1 = x] = log(-V1) - V + 2 log x + 1/x``."""
        x, y = _xy(x, y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.log(-self.V1(x, y)) - self.V(x, y) + 2 * np.log(x) + 1 / x

    def pickands(self, w):
        w = np.asarray(w, dtype=float)
        if np.any((w < 0) | (w > 1)):
            raise ValueError("w must lie in [0, 1]")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            a = self._pickands(w)
        return np.where((w == 0) | (w == 1), 1.0, a)

    def violation(self):
        for label, ok in self.constraints():
            if not ok:
                return label
        return None

    def validate(self):
        label = self.violation()
        if label is not None:
            raise ConstraintViolation(self.family, label)
        return self

    @property
    def is_valid(self) -> bool:
        return self.violation() is None

    @property
    def n_params(self) -> int:
        return self.to_vector().size


@dataclass(frozen=True)
class Logistic(DependenceModel):
    alpha: float = 0.5
    family: ClassVar[str] = "log"

    def V(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = np.logaddexp(-np.log(x) / a, -np.log(y) / a)
        return np.exp(a * ls)

    def V1(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = np.logaddexp(-np.log(x) / a, -np.log(y) / a)
        return -np.exp((-1 / a - 1) * np.log(x) + (a - 1) * ls)

    def V12(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = np.logaddexp(-np.log(x) / a, -np.log(y) / a)
        return (a - 1) / a * np.exp((-1 / a - 1) * (np.log(x) + np.log(y)) + (a - 2) * ls)

    def log_conditional(self, x, y):
        # with L = log(1 + (x/y)^(1/a)): -x^2 V1 = exp((a-1) L), V - 1/x = expm1(a L) / x
        x, y = _xy(x, y)
        a = self.alpha
        lr = np.logaddexp(0.0, (np.log(x) - np.log(y)) / a)
        return (a - 1) * lr - np.expm1(a * lr) / x

    def _pickands(self, w):
        a = self.alpha
        return np.exp(a * np.logaddexp(np.log1p(-w) / a, np.log(w) / a))

    def constraints(self):
        return [("0<α≤1", 0 < self.alpha <= 1), ("α≥1e-6", self.alpha >= ALPHA_MIN)]

    def to_vector(self):
        return np.array([_logit(self.alpha)])

    def with_vector(self, vec):
        return Logistic(float(expit(vec[0])))

    def params(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class NegLogistic(DependenceModel):
    alpha: float = 1.0
    family: ClassVar[str] = "nlog"

    def V(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = np.logaddexp(a * np.log(x), a * np.log(y))
        return 1 / x + 1 / y - np.exp(-ls / a)

    def V1(self, x, y):
        # -x^-2 [1 - (1 + (y/x)^a)^(-1/a-1)], kept accurate as y/x -> 0
        x, y = _xy(x, y)
        a = self.alpha
        lq = np.logaddexp(0.0, a * (np.log(y) - np.log(x)))
        return np.expm1(-(1 / a + 1) * lq) / x**2

    def V12(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = np.logaddexp(a * np.log(x), a * np.log(y))
        return -(a + 1) * np.exp((a - 1) * (np.log(x) + np.log(y)) + (-1 / a - 2) * ls)

    def _pickands(self, w):
        a = self.alpha
        return 1 - np.exp(-np.logaddexp(-a * np.log1p(-w), -a * np.log(w)) / a)

    def constraints(self):
        return [("α>0", self.alpha > 0), ("α≤1e6", self.alpha <= ALPHA_MAX)]

    def to_vector(self):
        return np.array([np.log(self.alpha)])

    def with_vector(self, vec):
        return NegLogistic(float(np.exp(vec[0])))

    def params(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class Mixed(DependenceModel):
    alpha: float = 0.5
    family: ClassVar[str] = "mix"

    def V(self, x, y):
        x, y = _xy(x, y)
        return 1 / x + 1 / y - self.alpha / (x + y)

    def V1(self, x, y):
        # -x^-2 + alpha/(x+y)^2 as a sign-definite form in p = x/(x+y), q = y/(x+y)
        x, y = _xy(x, y)
        p, q = x / (x + y), y / (x + y)
        return -((1 - self.alpha) * p**2 + 2 * p * q + q**2) / x**2

    def V12(self, x, y):
        x, y = _xy(x, y)
        return -2 * self.alpha / (x + y) ** 3

    def _pickands(self, w):
        return 1 - self.alpha * w * (1 - w)

    def constraints(self):
        return [("0≤α≤1", 0 <= self.alpha <= 1)]

    def to_vector(self):
        return np.array([_logit(self.alpha)])

    def with_vector(self, vec):
        return Mixed(float(expit(vec[0])))

    def params(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class AsymLogistic(DependenceModel):
    alpha: float = 0.5
    theta1: float = 0.5
    theta2: float = 0.5
    family: ClassVar[str] = "alog"

    def _ls(self, x, y):
        a = self.alpha
        return np.logaddexp(
            (_log(self.theta1) - np.log(x)) / a, (_log(self.theta2) - np.log(y)) / a
        )

    def V(self, x, y):
        x, y = _xy(x, y)
        tail = np.exp(self.alpha * self._ls(x, y))
        return (1 - self.theta1) / x + (1 - self.theta2) / y + tail

    def V1(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = self._ls(x, y)
        lc = np.broadcast_to(_log(self.theta1) / a, x.shape)
        return -(1 - self.theta1) / x**2 - _exp_or_zero(lc, (-1 / a - 1) * np.log(x) + (a - 1) * ls)

    def V12(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = self._ls(x, y)
        lc = np.broadcast_to((_log(self.theta1) + _log(self.theta2)) / a, x.shape)
        rest = (-1 / a - 1) * (np.log(x) + np.log(y)) + (a - 2) * ls
        return (a - 1) / a * _exp_or_zero(lc, rest)

    def swapped(self):
        return replace(self, theta1=self.theta2, theta2=self.theta1)

    def log_conditional(self, x, y):
        if self.theta1 == 0 or self.theta2 == 0:
            return super().log_conditional(x, y)
        # L = log(1 + r), r = ((theta2/y) / (theta1/x))^(1/a); cancellation-free in L
        x, y = _xy(x, y)
        a, t1, t2 = self.alpha, self.theta1, self.theta2
        lr = np.logaddexp(0.0, (np.log(t2) - np.log(y) - np.log(t1) + np.log(x)) / a)
        return np.log1p(t1 * np.expm1((a - 1) * lr)) - (1 - t2) / y - t1 * np.expm1(a * lr) / x

    def _pickands(self, w):
        a, t1, t2 = self.alpha, self.theta1, self.theta2
        ls = np.logaddexp((np.log1p(-w) + _log(t1)) / a, (np.log(w) + _log(t2)) / a)
        return (1 - t1) * (1 - w) + (1 - t2) * w + np.exp(a * ls)

    def constraints(self):
        return [
            ("0<α≤1", 0 < self.alpha <= 1),
            ("α≥1e-6", self.alpha >= ALPHA_MIN),
            ("0≤θ₁≤1", 0 <= self.theta1 <= 1),
            ("0≤θ₂≤1", 0 <= self.theta2 <= 1),
        ]

    def to_vector(self):
        return _logit(np.array([self.alpha, self.theta1, self.theta2]))

    def with_vector(self, vec):
        a, t1, t2 = expit(np.asarray(vec, dtype=float))
        return AsymLogistic(float(a), float(t1), float(t2))

    def params(self):
        return {"alpha": self.alpha, "theta1": self.theta1, "theta2": self.theta2}


@dataclass(frozen=True)
class AsymNegLogistic(DependenceModel):
    alpha: float = 1.0
    theta1: float = 0.5
    theta2: float = 0.5
    family: ClassVar[str] = "anlog"

    def _ls(self, x, y):
        a = self.alpha
        return np.logaddexp(a * (np.log(x) - np.log(self.theta1)), a * (np.log(y) - np.log(self.theta2)))

    def V(self, x, y):
        x, y = _xy(x, y)
        return 1 / x + 1 / y - np.exp(-self._ls(x, y) / self.alpha)

    def V1(self, x, y):
        # -x^-2 [1 - theta1 (1 + q)^(-1/a-1)] with q = ((y/theta2) / (x/theta1))^a
        x, y = _xy(x, y)
        a = self.alpha
        r = a * (np.log(y) - np.log(self.theta2) - np.log(x) + np.log(self.theta1))
        return np.expm1(np.log(self.theta1) - (1 / a + 1) * np.logaddexp(0.0, r)) / x**2

    def V12(self, x, y):
        x, y = _xy(x, y)
        a = self.alpha
        ls = self._ls(x, y)
        lc = -a * (np.log(self.theta1) + np.log(self.theta2))
        return -(a + 1) * np.exp(lc + (a - 1) * (np.log(x) + np.log(y)) + (-1 / a - 2) * ls)

    def swapped(self):
        return replace(self, theta1=self.theta2, theta2=self.theta1)

    def _pickands(self, w):
        a, t1, t2 = self.alpha, self.theta1, self.theta2
        ls = np.logaddexp(-a * (np.log1p(-w) + np.log(t1)), -a * (np.log(w) + np.log(t2)))
        return 1 - np.exp(-ls / a)

    def constraints(self):
        return [
            ("α>0", self.alpha > 0),
            ("α≤1e6", self.alpha <= ALPHA_MAX),
            ("0<θ₁≤1", 0 < self.theta1 <= 1),
            ("0<θ₂≤1", 0 < self.theta2 <= 1),
        ]

    def to_vector(self):
        return np.array([np.log(self.alpha), *_logit(np.array([self.theta1, self.theta2]))])

    def with_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        t1, t2 = expit(vec[1:3])
        return AsymNegLogistic(float(np.exp(vec[0])), float(t1), float(t2))

    def params(self):
        return {"alpha": self.alpha, "theta1": self.theta1, "theta2": self.theta2}


@dataclass(frozen=True)
class AsymMixed(DependenceModel):
    """Asymmetric mixed model, ``A(w) = 1 - (alpha+theta) w + alpha w^2 + theta w^3``.

    ``theta = 0`` gives the symmetric mixed model. The domain is the
    quadrilateral ``alpha >= 0``, ``alpha + 2 theta <= 1``,
    ``alpha + 3 theta >= 0``, ``alpha + theta <= 1``.
    """

    alpha: float = 0.5
    theta: float = 0.0
    family: ClassVar[str] = "amix"

    def _coef(self):
        return self.alpha + 2 * self.theta, self.alpha + self.theta

    def V(self, x, y):
        x, y = _xy(x, y)
        a, b = self._coef()
        s = x + y
        return 1 / x + 1 / y - (a * x + b * y) / s**2

    # The partials are written as cubic forms in p = x/(x+y), q = y/(x+y)
    # with non-positive coefficients, which avoids cancellation near the axes.
    def V1(self, x, y):
        x, y = _xy(x, y)
        a, b = self._coef()
        p, q = x / (x + y), y / (x + y)
        return -((1 - a) * p**3 + (3 + a - 2 * b) * p**2 * q + 3 * p * q**2 + q**3) / x**2

    def V2(self, x, y):
        x, y = _xy(x, y)
        a, b = self._coef()
        p, q = x / (x + y), y / (x + y)
        return -((1 - b) * q**3 + (3 + b - 2 * a) * p * q**2 + 3 * p**2 * q + p**3) / y**2

    def V12(self, x, y):
        x, y = _xy(x, y)
        a, b = self._coef()
        s = x + y
        return 2 * (a + b) / s**3 - 6 * (a * x + b * y) / s**4

    def swapped(self):
        # A(1 - w) is again a cubic of the same form
        return AsymMixed(self.alpha + 3 * self.theta, -self.theta)

    def _pickands(self, w):
        a, t = self.alpha, self.theta
        return 1 - (a + t) * w + a * w**2 + t * w**3

    def constraints(self):
        a, t = self.alpha, self.theta
        return [
            ("α≥0", a >= 0),
            ("α+2θ≤1", a + 2 * t <= 1),
            ("α+3θ≥0", a + 3 * t >= 0),
            ("α+θ≤1", a + t <= 1),
        ]

    @staticmethod
    def _alpha_range(theta):
        return max(0.0, -3 * theta), min(1 - theta, 1 - 2 * theta)

    def to_vector(self):
        lo, hi = self._alpha_range(self.theta)
        frac = (self.alpha - lo) / (hi - lo) if hi > lo else 0.5
        return np.array([_logit(self.theta + 0.5), _logit(frac)])

    def with_vector(self, vec):
        theta = float(expit(vec[0])) - 0.5
        lo, hi = self._alpha_range(theta)
        alpha = lo + (hi - lo) * float(expit(vec[1]))
        return AsymMixed(alpha, theta)

    def params(self):
        return {"alpha": self.alpha, "theta": self.theta}


@dataclass(frozen=True)
class Combination(DependenceModel):
    """``weight * V_first + (1 - weight) * V_second`` with a fixed weight."""

    first: DependenceModel = None
    second: DependenceModel = None
    weight: float = 0.5
    family: ClassVar[str] = "combo"

    def _mix(self, f, g):
        return self.weight * f + (1 - self.weight) * g

    def V(self, x, y):
        return self._mix(self.first.V(x, y), self.second.V(x, y))

    def V1(self, x, y):
        return self._mix(self.first.V1(x, y), self.second.V1(x, y))

    def V2(self, x, y):
        return self._mix(self.first.V2(x, y), self.second.V2(x, y))

    def V12(self, x, y):
        return self._mix(self.first.V12(x, y), self.second.V12(x, y))

    def swapped(self):
        return replace(self, first=self.first.swapped(), second=self.second.swapped())

    def pickands(self, w):
        return self._mix(self.first.pickands(w), self.second.pickands(w))

    def _pickands(self, w):  # pragma: no cover - pickands is overridden
        raise NotImplementedError

    def constraints(self):
        out = [("0≤a≤1", 0 <= self.weight <= 1)]
        out += [(f"first: {c}", ok) for c, ok in self.first.constraints()]
        out += [(f"second: {c}", ok) for c, ok in self.second.constraints()]
        return out

    def to_vector(self):
        return np.concatenate([self.first.to_vector(), self.second.to_vector()])

    def with_vector(self, vec):
        k = self.first.n_params
        return replace(self, first=self.first.with_vector(vec[:k]), second=self.second.with_vector(vec[k:]))

    def params(self):
        return {
            "weight": self.weight,
            "first": {"family": self.first.family, **self.first.params()},
            "second": {"family": self.second.family, **self.second.params()},
        }


_CLASSES = {c.family: c for c in (Logistic, NegLogistic, Mixed, AsymLogistic, AsymNegLogistic, AsymMixed)}


def make_model(family: str, **params) -> DependenceModel:
    """Build a model by family name; missing parameters take mid-domain defaults."""
    if family == "combo":
        first = params.pop("first", None) or AsymLogistic()
        second = params.pop("second", None) or AsymNegLogistic()
        if isinstance(first, dict):
            first = make_model(**first)
        if isinstance(second, dict):
            second = make_model(**second)
        return Combination(first, second, **params)
    try:
        cls = _CLASSES[family]
    except KeyError:
        raise ValueError(f"unknown dependence family {family!r}") from None
    return cls(**params)


def start_model(family: str, **fixed) -> DependenceModel:
    """Mid-domain model: the zero vector of the unconstrained parameterization."""
    m = make_model(family, **fixed)
    return m.with_vector(np.zeros(m.n_params))


def independence_model(family: str) -> DependenceModel:
    """Parameters at (or numerically indistinguishable from) independence.

    The negative logistic types only reach independence as alpha -> 0; at
    alpha = 1e-3 the dependence term is below 2**-1000.
    """
    return {
        "log": Logistic(1.0),
        "nlog": NegLogistic(1e-3),
        "mix": Mixed(0.0),
        "alog": AsymLogistic(1.0, 0.5, 0.5),
        "anlog": AsymNegLogistic(1e-3, 0.5, 0.5),
        "amix": AsymMixed(0.0, 0.0),
        "combo": Combination(AsymLogistic(1.0, 0.5, 0.5), AsymNegLogistic(1e-3, 0.5, 0.5), 0.5),
    }[family]


# Function-style API -------------------------------------------------------


def V(z1, z2, m: DependenceModel):
    return m.validate().V(z1, z2)


def V1(z1, z2, m: DependenceModel):
    return m.validate().V1(z1, z2)


def V2(z1, z2, m: DependenceModel):
    return m.validate().V2(z1, z2)


def V12(z1, z2, m: DependenceModel):
    return m.validate().V12(z1, z2)


def pickands_A(w, m: DependenceModel):
    return m.validate().pickands(w)


def pickands_from_V(w, m: DependenceModel):
    """``A(w) = V(z1, z2) / (1/z1 + 1/z2)`` evaluated at ``(z1, z2) = (w, 1-w)``."""
    w = np.asarray(w, dtype=float)
    return m.V(w, 1 - w) * w * (1 - w)


def chi_theoretical(m: DependenceModel) -> float:
    """Limiting ``chi = 2 - V(1, 1) = 2 (1 - A(1/2))``."""
    return float(2 - m.validate().V(1.0, 1.0))


def validate(m: DependenceModel) -> DependenceModel:
    return m.validate()


def unconstrained_map(m: DependenceModel) -> np.ndarray:
    return m.to_vector()


def from_unconstrained(m: DependenceModel, vec) -> DependenceModel:
    return m.with_vector(np.asarray(vec, dtype=float))
