"""IPU copula sampling and density evaluation.

The copula density is the driver-weighted mixture

    c(u) = sum_i P(Z = i) * prod_k f_{k, i_k}(u_k)

and a sample is ``(U_{1, Z_1}, ..., U_{d, Z_d})`` with ``Z`` drawn from the
driver and ``U_{k, i}`` drawn from ``f_{k, i}``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .drivers import BaseCopula, DriverSpec, SparseLaw, sample_base, sample_driver, truncated_law
from .families import (
    FamilyKind,
    component_log_density,
    driver_tail,
    sample_component,
)

__all__ = [
    "DensityGrid",
    "IpuModel",
    "TruncationError",
    "TruncationPolicy",
    "TruncationWarning",
    "density",
    "density_grid",
    "sample_copula",
    "simulate",
    "tensor_density",
]

CHUNK_SIZE = 1 << 20


class TruncationWarning(UserWarning):
    """The index cap was reached before the neglected mass fell below tail_eps."""


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    tail_eps: float = 1e-10
    max_index: int = 10_000
    strict: bool = False  # raise instead of warn when the cap is hit

    def __post_init__(self):
        if not 0 < self.tail_eps < 1:
            raise ValueError("tail_eps must lie in (0, 1)")
        if self.max_index < 1:
            raise ValueError("max_index must be positive")


@dataclass(frozen=True)
class IpuModel:
    spec: DriverSpec

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def families(self):
        return self.spec.families


def sample_copula(model: IpuModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` rows of the IPU copula from a single random stream."""
    if count < 1:
        raise ValueError("count must be >= 1")
    z = sample_driver(model.spec, rng, size=count)
    u = np.empty(z.shape)
    for k, fam in enumerate(model.families):
        u[:, k] = sample_component(fam, z[:, k], rng)
    return u


def simulate(model: IpuModel, count: int, seed: int, workers: int = 1, chunk_size: int = CHUNK_SIZE):
    """Reproducible sharded sampling from an IPU model or a bare base copula.

    The rows are produced in fixed chunks, each with its own stream spawned
    from ``seed``; the result does not depend on ``workers``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sizes = [chunk_size] * (count // chunk_size)
    if count % chunk_size:
        sizes.append(count % chunk_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(job):
        size, ss = job
        rng = np.random.default_rng(ss)
        if isinstance(model, BaseCopula):
            return sample_base(model, rng, size=size)
        return sample_copula(model, size, rng)

    jobs = list(zip(sizes, streams))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    return np.concatenate(parts)


def _mode_index(fam, u):
    # f_{i+1}(u) / f_i(u) is decreasing in i; the first i where it drops to <= 1
    a = fam.a
    if fam.kind is FamilyKind.NEGATIVE_BINOMIAL:
        x = (u * (a + 2) - 1) / (1 - u)
    else:
        x = (a + 1) * -np.log1p(-u) - 1
    return np.ceil(np.maximum(x, 0.0))


def _cdf_cutoff(fam, eps: float) -> float:
    """First ``i`` with ``P(Z > i) < eps``."""
    if fam.kind is FamilyKind.NEGATIVE_BINOMIAL:
        i = math.floor(fam.a / eps - fam.a - 1)
    else:
        i = math.floor(math.log(1 / eps) / math.log1p(1 / fam.a) - 1)
    i = max(i - 2, 0)
    while driver_tail(fam, i) >= eps:
        i += 1
    return i


class _Components:
    """Component log-densities on the distinct values of each coordinate."""

    def __init__(self, model: IpuModel, values, policy: TruncationPolicy):
        self.values = [np.asarray(v, dtype=float) for v in values]
        for v in self.values:
            if np.any(~((v > 0) & (v < 1))):
                raise ValueError("density is defined only strictly inside the open unit cube")
        fams = model.families
        caps = [min(policy.max_index, _cdf_cutoff(f, policy.tail_eps)) for f in fams]
        log_sup = [
            component_log_density(f, _mode_index(f, v), v).max() for f, v in zip(fams, self.values)
        ]
        total_log_sup = sum(log_sup)
        self.cutoffs = []
        self.residual = 0.0
        capped = False
        for k, (f, v) in enumerate(zip(fams, self.values)):
            others = total_log_sup - log_sup[k]
            i = np.arange(caps[k] + 1, dtype=float)[:, None]
            mode = _mode_index(f, v)[None, :]
            # bound on the contribution of all indices beyond i in coordinate k
            beyond = np.maximum(i + 1, mode)
            log_bound = (np.log(driver_tail(f, i)) + component_log_density(f, beyond, v) + others).max(axis=1)
            ok = np.flatnonzero(log_bound <= math.log(policy.tail_eps))
            cut = int(ok[0]) if ok.size else caps[k]
            self.cutoffs.append(cut)
            self.residual += float(np.exp(log_bound[cut]))
            if not ok.size and caps[k] == policy.max_index:
                capped = True
        if capped and self.residual > policy.tail_eps:
            msg = (f"index cap max_index={policy.max_index} reached; "
                   f"neglected density bound {self.residual:.3g} > tail_eps={policy.tail_eps:g}")
            if policy.strict:
                raise TruncationError(msg)
            warnings.warn(msg, TruncationWarning, stacklevel=3)
        self.tables = [
            np.exp(component_log_density(f, np.arange(c + 1, dtype=float)[:, None], v[None, :]))
            for f, c, v in zip(fams, self.cutoffs, self.values)
        ]


def _evaluate_points(law, tables, maps, chunk=512):
    npts = len(maps[0])
    out = np.empty(npts)
    for start in range(0, npts, chunk):
        sl = slice(start, start + chunk)
        if isinstance(law, SparseLaw):
            prod = law.masses[:, None]
            for k, table in enumerate(tables):
                prod = prod * table[law.indices[:, k]][:, maps[k][sl]]
            out[sl] = prod.sum(axis=0)
        else:
            prod = 1.0
            for k, table in enumerate(tables):
                prod = prod * (law.weights[k] @ table[:, maps[k][sl]])
            out[sl] = np.mean(prod, axis=0)
    return out


def density(model: IpuModel, u, policy: TruncationPolicy | None = None, return_bound: bool = False):
    """Truncated IPU copula density at one point or at each row of ``u``.

    The enumeration stops, per coordinate, at the first index where a bound
    on everything neglected drops below ``policy.tail_eps`` (and never beyond
    the driver-mass cutoff or ``policy.max_index``). With ``return_bound``,
    the neglected-contribution bound is returned as a second value.
    """
    policy = policy or TruncationPolicy()
    pts = np.asarray(u, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != model.d:
        raise ValueError(f"points must have {model.d} coordinates")
    uniq, maps = zip(*(np.unique(pts[:, k], return_inverse=True) for k in range(model.d)))
    comps = _Components(model, uniq, policy)
    law = truncated_law(model.spec, comps.cutoffs)
    vals = _evaluate_points(law, comps.tables, [m.ravel() for m in maps])
    result = float(vals[0]) if single else vals
    return (result, comps.residual) if return_bound else result


@dataclass(frozen=True)
class DensityGrid:
    """Density at cell midpoints ``(j - 0.5) / resolution`` of a 2-D grid."""

    u: np.ndarray
    v: np.ndarray
    values: np.ndarray  # values[a, b] = c(u[a], v[b])
    residual: float

    def rows(self):
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        return np.column_stack([uu.ravel(), vv.ravel(), self.values.ravel()])


def tensor_density(model: IpuModel, u, v, policy: TruncationPolicy | None = None):
    """Bivariate density on the tensor grid ``u x v``; returns (values, bound)."""
    policy = policy or TruncationPolicy()
    if model.d != 2:
        raise ValueError("tensor grids are bivariate only")
    comps = _Components(model, [u, v], policy)
    law = truncated_law(model.spec, comps.cutoffs)
    t1, t2 = comps.tables
    if isinstance(law, SparseLaw):
        shape = (t1.shape[0], t2.shape[0])
        P = sparse.csr_matrix((law.masses, (law.indices[:, 0], law.indices[:, 1])), shape=shape)
        vals = t1.T @ (P @ t2)
    else:
        w1, w2 = law.weights
        vals = (w1 @ t1).T @ (w2 @ t2) / w1.shape[0]
    return np.asarray(vals), comps.residual


def density_grid(model: IpuModel, resolution: int, policy: TruncationPolicy | None = None) -> DensityGrid:
    if model.d != 2:
        raise ValueError("density_grid requires d = 2")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    mid = (np.arange(1, resolution + 1) - 0.5) / resolution
    vals, residual = tensor_density(model, mid, mid, policy)
    return DensityGrid(mid, mid.copy(), vals, residual)
