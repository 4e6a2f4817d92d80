"""Negative binomial and Poisson partitions of unity.

For each family the weights ``phi_i(u)`` form a discrete distribution over
``i = 0, 1, ...`` for every fixed ``u``; ``alpha_i`` is the integral of
``phi_i`` over (0, 1) and ``f_i = phi_i / alpha_i`` the induced component
density. All functions broadcast over array arguments ``i`` and ``u``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

__all__ = [
    "FamilyKind",
    "FamilyParams",
    "component_density",
    "component_log_density",
    "driver_cdf",
    "driver_quantile",
    "driver_tail",
    "marginal_alpha",
    "nb",
    "phi_weight",
    "poisson",
    "sample_component",
]

# Driver indices are capped here so that floor() never overflows int64.
MAX_DRIVER_INDEX = 2**62


class FamilyKind(enum.Enum):
    NEGATIVE_BINOMIAL = "nb"
    POISSON = "poisson"


@dataclass(frozen=True)
class FamilyParams:
    kind: FamilyKind
    a: float

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        a = float(self.a)
        if not (math.isfinite(a) and a > 0):
            raise ValueError(f"family parameter a must be positive, got {self.a!r}")
        if kind is FamilyKind.NEGATIVE_BINOMIAL:
            if a != int(a):
                raise ValueError(f"negative binomial parameter a must be an integer, got {self.a!r}")
            a = int(a)
        object.__setattr__(self, "a", a)

    def __str__(self):
        return f"{self.kind.value}(a={self.a})"


def nb(a) -> FamilyParams:
    return FamilyParams(FamilyKind.NEGATIVE_BINOMIAL, a)


def poisson(a) -> FamilyParams:
    return FamilyParams(FamilyKind.POISSON, a)


def _check_open_unit(u, name="u"):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise ValueError(f"{name} must lie strictly inside (0, 1)")
    return u


def _check_index(i):
    i = np.asarray(i)
    if np.any(i < 0):
        raise ValueError("component index i must be nonnegative")
    return i.astype(float)


def _log_phi(p: FamilyParams, i, u):
    a = p.a
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        log_binom = gammaln(a + i) - gammaln(i + 1) - gammaln(a)
        return log_binom + xlogy(i, u) + a * np.log1p(-u)
    L = -np.log1p(-u)
    return a * np.log1p(-u) + xlogy(i, a * L) - gammaln(i + 1)


def phi_weight(p: FamilyParams, i, u):
    """Partition weight ``phi_i(u)``; sums to one over ``i`` for each ``u``."""
    u = _check_open_unit(u)
    i = _check_index(i)
    return np.exp(_log_phi(p, i, u))


def _log_alpha(p: FamilyParams, i):
    a = p.a
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        return math.log(a) - np.log(a + i) - np.log(a + i + 1)
    return xlogy(i, a) - (i + 1) * math.log(a + 1)


def marginal_alpha(p: FamilyParams, i):
    """Marginal mass ``alpha_i = P(Z = i)`` of the driver coordinate."""
    return np.exp(_log_alpha(p, _check_index(i)))


def component_log_density(p: FamilyParams, i, u):
    """Log of ``f_i(u)``; NB gives Beta(i+1, a+1), Poisson a transformed gamma."""
    u = _check_open_unit(u)
    i = _check_index(i)
    a = p.a
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        return (gammaln(a + i + 2) - gammaln(i + 1) - gammaln(a + 1)
                + xlogy(i, u) + a * np.log1p(-u))
    L = -np.log1p(-u)
    return (i + 1) * math.log(a + 1) + xlogy(i, L) - gammaln(i + 1) + a * np.log1p(-u)


def component_density(p: FamilyParams, i, u):
    return np.exp(component_log_density(p, i, u))


def _log_ratio(p: FamilyParams) -> float:
    # log((a+1)/a), the geometric decay rate of the Poisson driver law
    return math.log1p(1.0 / p.a)


def driver_cdf(p: FamilyParams, i):
    """``P(Z <= i)``; returns 0 for ``i = -1``."""
    i = np.asarray(i, dtype=float)
    if np.any(i < -1):
        raise ValueError("driver_cdf is defined for i >= -1")
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        return (i + 1) / (p.a + i + 1)
    return -np.expm1(-(i + 1) * _log_ratio(p))


def driver_tail(p: FamilyParams, i):
    """``P(Z > i)``, computed without cancellation."""
    i = np.asarray(i, dtype=float)
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        return p.a / (p.a + i + 1)
    return np.exp(-(i + 1) * _log_ratio(p))


def driver_quantile(p: FamilyParams, u_hat):
    """Generalized inverse of :func:`driver_cdf`.

    The closed-form floor is corrected by one step against the cdf so that
    ``driver_cdf(i - 1) <= u_hat < driver_cdf(i)`` holds exactly in floating
    point, including at the interval endpoints.
    """
    u = _check_open_unit(u_hat, "u_hat")
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        x = p.a * u / (1.0 - u)
    else:
        x = -np.log1p(-u) / _log_ratio(p)
    i = np.floor(np.minimum(x, float(MAX_DRIVER_INDEX))).astype(np.int64)
    i = i + (driver_cdf(p, i) <= u)
    i = i - ((i > 0) & (driver_cdf(p, i - 1) > u))
    if np.ndim(i) == 0:
        return int(i)
    return i


def sample_component(p: FamilyParams, i, rng: np.random.Generator, size=None):
    """Draw from the component density ``f_i``.

    NB: an exact Beta(i+1, a+1) variate. Poisson: ``1 - exp(-Y)`` with
    ``Y ~ Gamma(shape=i+1, rate=a+1)``. Outputs are kept strictly inside (0, 1).
    """
    i = np.asarray(i, dtype=float)
    if np.any(i < 0):
        raise ValueError("component index i must be nonnegative")
    if p.kind is FamilyKind.NEGATIVE_BINOMIAL:
        u = rng.beta(i + 1.0, p.a + 1.0, size=size)
    else:
        y = rng.gamma(i + 1.0, 1.0 / (p.a + 1.0), size=size)
        u = -np.expm1(-y)
    return np.clip(u, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
