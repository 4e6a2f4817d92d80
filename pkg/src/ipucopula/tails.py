"""Upper tail dependence: closed forms for the NB copula and a plug-in estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "TailEstimate",
    "empirical_lambda_u",
    "lambda_u_nb_asymptotic",
    "lambda_u_nb_exact",
]


@dataclass(frozen=True)
class TailEstimate:
    threshold: float
    estimate: float
    count: int


def lambda_u_nb_exact(a: int) -> float:
    """``1 - C(2a, a) / 4^a`` for the comonotone-driver NB copula with ``a1 = a2 = a``."""
    if int(a) != a or a < 1:
        raise ValueError(f"a must be a positive integer, got {a!r}")
    a = int(a)
    if a <= 500:
        return 1.0 - math.comb(2 * a, a) / 4**a
    log_ratio = gammaln(2 * a + 1) - 2 * gammaln(a + 1) - a * math.log(4)
    return float(-np.expm1(log_ratio))


def lambda_u_nb_asymptotic(a: float) -> float:
    """Large-``a`` approximation ``1 - 1 / sqrt(pi a)``, clamped to [0, 1]."""
    if a <= 0:
        raise ValueError("a must be positive")
    return min(1.0, max(0.0, 1.0 - 1.0 / math.sqrt(math.pi * a)))


def empirical_lambda_u(samples, t: float) -> TailEstimate:
    """Share of rows with both coordinates above ``t``, divided by ``1 - t``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2 or len(x) < 1:
        raise ValueError("samples must be an N x 2 matrix with N >= 1")
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    hits = np.count_nonzero((x[:, 0] > t) & (x[:, 1] > t))
    lam = hits / (len(x) * (1.0 - t))
    return TailEstimate(float(t), float(min(1.0, max(0.0, lam))), len(x))
