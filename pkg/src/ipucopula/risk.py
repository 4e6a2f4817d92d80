"""Marginal fitting, Value-at-Risk and Monte Carlo risk aggregation."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .engine import IpuModel, simulate

__all__ = [
    "FitError",
    "MarginalKind",
    "MarginalModel",
    "VarReport",
    "aggregate_var",
    "empirical_var",
    "fit_frechet",
    "fit_lognormal",
    "order_statistic_rank",
    "quantile_marginal",
    "quantile_table",
]


class FitError(ValueError):
    pass


class MarginalKind(enum.Enum):
    LOGNORMAL = "lognormal"
    FRECHET = "frechet"


@dataclass(frozen=True)
class MarginalModel:
    """Lognormal ``(mu, sigma)`` or two-parameter Frechet ``(shape, scale)``."""

    kind: MarginalKind
    params: tuple

    def __post_init__(self):
        kind = MarginalKind(self.kind)
        object.__setattr__(self, "kind", kind)
        p = tuple(float(x) for x in self.params)
        if len(p) != 2 or not all(math.isfinite(x) for x in p):
            raise ValueError("marginal models take two finite parameters")
        if kind is MarginalKind.LOGNORMAL and p[1] <= 0:
            raise ValueError("lognormal sigma must be positive")
        if kind is MarginalKind.FRECHET and (p[0] <= 0 or p[1] <= 0):
            raise ValueError("Frechet shape and scale must be positive")
        object.__setattr__(self, "params", p)

    @classmethod
    def lognormal(cls, mu, sigma):
        return cls(MarginalKind.LOGNORMAL, (mu, sigma))

    @classmethod
    def frechet(cls, shape, scale):
        return cls(MarginalKind.FRECHET, (shape, scale))

    def to_dict(self):
        names = ("mu", "sigma") if self.kind is MarginalKind.LOGNORMAL else ("shape", "scale")
        return {"kind": self.kind.value, **dict(zip(names, self.params))}


def _positive_sample(data):
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise FitError("need at least two observations")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise FitError("all observations must be finite and positive")
    if np.all(x == x[0]):
        raise FitError("degenerate data: all observations are equal")
    return x


def fit_lognormal(data) -> MarginalModel:
    """Maximum likelihood lognormal fit (variance divisor ``n``)."""
    logx = np.log(_positive_sample(data))
    return MarginalModel.lognormal(logx.mean(), logx.std())


def fit_frechet(data, rtol: float = 1e-10) -> MarginalModel:
    """Maximum likelihood fit of ``F(y) = exp(-(y / s)^(-alpha))``.

    The shape solves the profile score
    ``1/alpha - mean(log y) + sum(w log y) / sum(w) = 0`` with ``w = y^(-alpha)``,
    which is strictly decreasing in ``alpha``; the scale then follows from
    ``s^alpha = n / sum(y^(-alpha))``.
    """
    logy = np.log(_positive_sample(data))
    centered = logy - logy.min()
    gap = logy.mean() - logy.min()

    def score(alpha):
        w = np.exp(-alpha * centered)
        return 1.0 / alpha - gap + np.dot(w, centered) / w.sum()

    lo, hi = 1e-3, 1.0
    while score(hi) > 0:
        hi *= 2
        if hi > 1e8:
            raise FitError(f"Frechet shape not bracketed: score({hi:g}) = {score(hi):g} > 0")
    while score(lo) < 0:
        lo /= 2
        if lo < 1e-12:
            raise FitError(f"Frechet shape not bracketed: score({lo:g}) = {score(lo):g} < 0")
    alpha, info = brentq(score, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps),
                         full_output=True)
    if not info.converged:
        raise FitError(f"Frechet shape solve did not converge in [{lo:g}, {hi:g}]")
    # log s = min log y + (log n - log sum(w)) / alpha, with w centered for stability
    w = np.exp(-alpha * centered)
    log_scale = logy.min() + (math.log(len(logy)) - math.log(w.sum())) / alpha
    return MarginalModel.frechet(alpha, math.exp(log_scale))


def quantile_marginal(model: MarginalModel, p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise ValueError("p must lie strictly inside (0, 1)")
    if model.kind is MarginalKind.LOGNORMAL:
        mu, sigma = model.params
        q = np.exp(mu + sigma * ndtri(p_arr))
    else:
        shape, scale = model.params
        q = scale * (-np.log(p_arr)) ** (-1.0 / shape)
    return float(q) if np.ndim(q) == 0 else q


def order_statistic_rank(count: int, alpha: float) -> int:
    """1-based rank ``ceil((1 - alpha) * count)``, computed exactly for decimal ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return _rank(count, 1 - Fraction(repr(float(alpha))))


def _rank(count: int, p: Fraction) -> int:
    return min(max(math.ceil(p * count), 1), count)


def empirical_var(samples, alpha: float) -> float:
    """The ``ceil((1 - alpha) N)``-th smallest sample (selection, no full sort)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    k = order_statistic_rank(x.size, alpha)
    return float(np.partition(x, k - 1)[k - 1])


def quantile_table(samples, probabilities):
    """Rows ``(p, q)`` with ``q`` the ``ceil(p N)``-th order statistic."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    probs = [float(p) for p in probabilities]
    if not probs:
        raise ValueError("no probabilities given")
    if not all(0 < p < 1 for p in probs):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    ranks = [_rank(x.size, Fraction(repr(p))) for p in probs]
    part = np.partition(x, sorted({r - 1 for r in ranks}))
    return [(p, float(part[r - 1])) for p, r in zip(probs, ranks)]


@dataclass
class VarReport:
    alpha: float
    seed: int
    count: int
    marginal_var: list
    aggregate: float
    comparator: float
    marginals: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def aggregate_var(model: IpuModel, marginals, alpha: float, count: int, seed: int,
                  workers: int = 1, return_sums: bool = False):
    """VaR of ``S = sum_k X_k`` with ``X_k = F_k^{-1}(U_k)`` and ``U`` from the copula.

    ``model`` is an :class:`IpuModel` or a bare :class:`BaseCopula`; the latter
    aggregates directly under the base (e.g. the upper Frechet bound).

    Returns a :class:`VarReport`; with ``return_sums`` also the simulated sums.
    """
    marginals = list(marginals)
    if len(marginals) != model.d:
        raise ValueError(f"need {model.d} marginals, got {len(marginals)}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    u = simulate(model, count, seed, workers=workers)
    sums = np.zeros(len(u))
    for k, m in enumerate(marginals):
        sums += quantile_marginal(m, u[:, k])
    del u
    per = [quantile_marginal(m, 1 - alpha) for m in marginals]
    report = VarReport(
        alpha=float(alpha),
        seed=int(seed),
        count=int(count),
        marginal_var=per,
        aggregate=empirical_var(sums, alpha),
        comparator=float(sum(per)),
        marginals=[m.to_dict() for m in marginals],
    )
    return (report, sums) if return_sums else report
