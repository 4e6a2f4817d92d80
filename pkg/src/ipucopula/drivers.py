"""Base copulas and the discrete IPU drivers built on top of them.

A base copula ``C_hat`` on (0, 1)^d is turned into a driver ``Z`` by the
coordinatewise quantile transform ``Z_k = F_k^{-1}(U_hat_k)``, where ``F_k``
is the cdf of the family's marginal masses ``alpha_k``. Any base with
uniform marginals therefore yields a driver with the required marginals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .data import RankMatrix
from .families import FamilyParams, driver_cdf, driver_quantile, marginal_alpha

__all__ = [
    "BaseCopula",
    "BaseKind",
    "DriverSpec",
    "MixtureLaw",
    "SparseLaw",
    "bernstein",
    "comonotone",
    "driver_pmf",
    "independence",
    "rectangle_mass",
    "sample_base",
    "sample_driver",
    "quantile_transform",
    "segment_point",
    "shuffle_of_m",
    "truncated_law",
    "worst_case_shuffle",
]


class BaseKind(enum.Enum):
    SHUFFLE_M = "shuffle"
    SHUFFLE_M_WORST_CASE = "wc-shuffle"
    BERNSTEIN = "bernstein"
    COMONOTONE = "comonotone"
    INDEPENDENCE = "independence"


_SHUFFLES = (BaseKind.SHUFFLE_M, BaseKind.SHUFFLE_M_WORST_CASE)


@dataclass(frozen=True)
class BaseCopula:
    """A sampleable copula with an exact rectangle-mass oracle.

    For the shuffle kinds each row ``J`` of ``ranks`` is a grid cell holding a
    segment of slope +1 (or -1 where ``negative[J]``) between coordinate 1 and
    every other coordinate. For the Bernstein kind the rows are the rank
    vectors that parameterize the beta mixture.
    """

    kind: BaseKind
    d: int
    ranks: np.ndarray | None = None
    negative: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        kind = BaseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if kind in _SHUFFLES or kind is BaseKind.BERNSTEIN:
            r = np.array(RankMatrix(self.ranks).ranks)
            if r.shape[1] != self.d:
                raise ValueError("rank matrix width does not match d")
            r.setflags(write=False)
            object.__setattr__(self, "ranks", r)
        neg = self.negative
        if neg is None:
            neg = np.zeros(0 if self.ranks is None else len(self.ranks), dtype=bool)
        neg = np.array(neg, dtype=bool)
        if neg.any() and kind is not BaseKind.SHUFFLE_M_WORST_CASE:
            raise ValueError("negative slopes are only allowed in the worst-case shuffle")
        neg.setflags(write=False)
        object.__setattr__(self, "negative", neg)

    @property
    def n(self) -> int:
        return 1 if self.ranks is None else len(self.ranks)


def shuffle_of_m(ranks: RankMatrix) -> BaseCopula:
    """Shuffle of M with one positively sloped segment per observation cell."""
    return BaseCopula(BaseKind.SHUFFLE_M, ranks.d, ranks.ranks)


def _corner_coincides(r: np.ndarray, m: int) -> bool:
    n = len(r)
    return set(np.flatnonzero(r[:, 0] > n - m)) == set(np.flatnonzero(r[:, 1] > n - m))


def worst_case_shuffle(ranks: RankMatrix, corner_size: int | None = None) -> BaseCopula:
    """Shuffle of M with a countermonotone block in the top corner.

    The corner holds the ``m`` observations that are jointly the largest in
    both coordinates. Without ``corner_size``, ``m`` is the largest value for
    which the top-``k`` observation sets of the two columns coincide for every
    ``k <= m`` (so ``m = n`` only if the ranks are identical). The
    corner observations are re-paired countermonotonically and their cells
    get negative slope; all other cells are those of :func:`shuffle_of_m`.
    """
    if ranks.d != 2:
        raise ValueError("worst_case_shuffle is bivariate only")
    r = np.array(ranks.ranks)
    n = ranks.n
    if corner_size is None:
        m = 0
        while m < n and _corner_coincides(r, m + 1):
            m += 1
        if m == 0:
            raise ValueError("no corner: the largest observations differ between coordinates")
    else:
        m = int(corner_size)
        if not 1 <= m <= n:
            raise ValueError(f"corner_size must be in 1..{n}, got {corner_size}")
        if not _corner_coincides(r, m):
            raise ValueError(f"corner_size={m}: top-{m} observation sets differ between coordinates")
    corner = np.flatnonzero(r[:, 0] > n - m)
    # largest first coordinate pairs with smallest corner second coordinate
    r[corner, 1] = (2 * n - m + 1) - r[corner, 0]
    negative = np.zeros(n, dtype=bool)
    negative[corner] = True
    return BaseCopula(BaseKind.SHUFFLE_M_WORST_CASE, 2, r, negative)


def bernstein(ranks: RankMatrix) -> BaseCopula:
    """Bernstein copula with grid size ``n`` on the empirical copula."""
    return BaseCopula(BaseKind.BERNSTEIN, ranks.d, ranks.ranks)


def comonotone(d: int) -> BaseCopula:
    return BaseCopula(BaseKind.COMONOTONE, d)


def independence(d: int) -> BaseCopula:
    return BaseCopula(BaseKind.INDEPENDENCE, d)


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    # uniform on the open interval (0, 1), 53-bit resolution
    return rng.integers(1, 2**53, size=size) * 2.0**-53


def _cell_geometry(base: BaseCopula):
    """Per-cell ranks and slope signs for the segment kinds (comonotone is one cell)."""
    if base.kind is BaseKind.COMONOTONE:
        return np.ones((1, base.d), dtype=np.int64), np.zeros(1, dtype=bool)
    return base.ranks, base.negative


def segment_point(base: BaseCopula, cell, v):
    """Point of the segment in ``cell`` (0-based) at position ``v`` in (0, 1)."""
    ranks, negative = _cell_geometry(base)
    cell = np.asarray(cell)
    v = np.asarray(v, dtype=float)[..., None]
    r = ranks[cell]
    n = len(ranks)
    up = (r - 1 + v) / n
    down = (r - v) / n
    flip = np.zeros(r.shape, dtype=bool)
    flip[..., 1:] = negative[cell][..., None]
    return np.where(flip, down, up)


def sample_base(base: BaseCopula, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the base copula; one point of shape ``(d,)`` or ``(size, d)``."""
    count = 1 if size is None else int(size)
    d = base.d
    kind = base.kind
    if kind in _SHUFFLES or kind is BaseKind.COMONOTONE:
        cells = rng.integers(0, base.n, size=count)
        out = segment_point(base, cells, _open_uniform(rng, count))
    elif kind is BaseKind.INDEPENDENCE:
        out = _open_uniform(rng, (count, d))
    else:
        n = base.n
        cells = rng.integers(0, n, size=count)
        r = base.ranks[cells].astype(float)
        out = rng.beta(r, n + 1.0 - r)
        out = np.clip(out, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return out[0] if size is None else out


def rectangle_mass(base: BaseCopula, lo, hi) -> float:
    """Base-copula measure of the box ``prod_k [lo_k, hi_k)``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (base.d,) or hi.shape != (base.d,):
        raise ValueError(f"rectangle corners must have length d={base.d}")
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(lo > hi):
        raise ValueError("malformed rectangle: need finite lo <= hi componentwise")
    lo = np.clip(lo, 0.0, 1.0)
    hi = np.clip(hi, 0.0, 1.0)
    kind = base.kind
    if kind is BaseKind.INDEPENDENCE:
        return float(np.prod(hi - lo))
    if kind is BaseKind.COMONOTONE:
        return float(max(0.0, hi.min() - lo.max()))
    n = base.n
    r = base.ranks.astype(float)
    if kind is BaseKind.BERNSTEIN:
        b = n + 1.0 - r
        cell_mass = np.prod(betainc(r, b, hi) - betainc(r, b, lo), axis=1)
        return float(cell_mass.sum() / n)
    # V-interval on which each coordinate of each cell's segment is inside
    v_lo = n * lo - r + 1
    v_hi = n * hi - r + 1
    flip = np.zeros(r.shape, dtype=bool)
    flip[:, 1:] = base.negative[:, None]
    v_lo, v_hi = np.where(flip, r - n * hi, v_lo), np.where(flip, r - n * lo, v_hi)
    left = np.maximum(v_lo.max(axis=1), 0.0)
    right = np.minimum(v_hi.min(axis=1), 1.0)
    return float(np.clip(right - left, 0.0, None).sum() / n)


@dataclass(frozen=True)
class DriverSpec:
    base: BaseCopula
    families: tuple

    def __post_init__(self):
        fams = tuple(self.families)
        if len(fams) != self.base.d:
            raise ValueError(f"need {self.base.d} families, got {len(fams)}")
        if not all(isinstance(f, FamilyParams) for f in fams):
            raise TypeError("families must be FamilyParams")
        object.__setattr__(self, "families", fams)

    @property
    def d(self) -> int:
        return self.base.d


def sample_driver(spec: DriverSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw driver vectors ``Z`` with ``Z_k = F_k^{-1}(U_hat_k)``, ``U_hat ~ base``."""
    u = sample_base(spec.base, rng, size=size)
    return quantile_transform(spec, u)


def quantile_transform(spec: DriverSpec, u_hat) -> np.ndarray:
    u_hat = np.asarray(u_hat, dtype=float)
    z = np.empty(u_hat.shape, dtype=np.int64)
    for k, fam in enumerate(spec.families):
        z[..., k] = driver_quantile(fam, u_hat[..., k])
    return z


def driver_pmf(spec: DriverSpec, i) -> float:
    """``P(Z = i)`` as the base mass of the cdf box ``[F_k(i_k - 1), F_k(i_k))``."""
    i = np.asarray(i)
    if i.shape != (spec.d,) or np.any(i < 0):
        raise ValueError("driver index must be a nonnegative vector of length d")
    lo = [float(driver_cdf(f, ik - 1)) for f, ik in zip(spec.families, i)]
    hi = [float(driver_cdf(f, ik)) for f, ik in zip(spec.families, i)]
    return rectangle_mass(spec.base, lo, hi)


@dataclass(frozen=True)
class SparseLaw:
    """Driver law as a list of index tuples and their masses."""

    indices: np.ndarray  # (m, d) int64
    masses: np.ndarray  # (m,)


@dataclass(frozen=True)
class MixtureLaw:
    """Driver law ``P(Z = i) = mean_J prod_k weights[k][J, i_k]``."""

    weights: tuple  # d arrays of shape (n, I_k + 1)


def truncated_law(spec: DriverSpec, cutoffs):
    """Driver law restricted to ``0 <= i_k <= cutoffs[k]``.

    Segment bases (shuffles, comonotone) give a :class:`SparseLaw` found by
    walking each segment across the cdf breakpoints, so only index tuples of
    positive mass are produced. Bernstein and independence bases factor per
    mixture cell and give a :class:`MixtureLaw`.
    """
    cutoffs = [int(c) for c in cutoffs]
    fams = spec.families
    base = spec.base
    grids = [np.arange(c + 1) for c in cutoffs]
    if base.kind is BaseKind.INDEPENDENCE:
        return MixtureLaw(tuple(marginal_alpha(f, g)[None, :] for f, g in zip(fams, grids)))
    if base.kind is BaseKind.BERNSTEIN:
        n = base.n
        weights = []
        for k, (f, g) in enumerate(zip(fams, grids)):
            r = base.ranks[:, k].astype(float)[:, None]
            edges = driver_cdf(f, np.arange(-1, cutoffs[k] + 1))[None, :]
            cdf = betainc(r, n + 1.0 - r, edges)
            weights.append(np.diff(cdf, axis=1))
        return MixtureLaw(tuple(weights))
    return _segment_walk(spec, cutoffs)


def _segment_walk(spec: DriverSpec, cutoffs) -> SparseLaw:
    ranks, negative = _cell_geometry(spec.base)
    n = len(ranks)
    d = spec.d
    edges = [driver_cdf(f, np.arange(c + 1)) for f, c in zip(spec.families, cutoffs)]
    all_idx = []
    all_mass = []
    for J in range(n):
        cuts = [np.array([0.0, 1.0])]
        for k in range(d):
            r = ranks[J, k]
            e = edges[k]
            inside = e[(e > (r - 1) / n) & (e < r / n)]
            if k > 0 and negative[J]:
                cuts.append(r - n * inside)
            else:
                cuts.append(n * inside - r + 1)
        v = np.unique(np.clip(np.concatenate(cuts), 0.0, 1.0))
        length = np.diff(v)
        keep = length > 0
        mid = 0.5 * (v[:-1] + v[1:])[keep]
        pts = segment_point(spec.base, np.full(mid.shape, J), mid)
        idx = quantile_transform(spec, pts)
        ok = np.all(idx <= np.asarray(cutoffs), axis=1)
        all_idx.append(idx[ok])
        all_mass.append(length[keep][ok] / n)
    idx = np.concatenate(all_idx)
    mass = np.concatenate(all_mass)
    uniq, inv = np.unique(idx, axis=0, return_inverse=True)
    return SparseLaw(uniq, np.bincount(inv.ravel(), weights=mass, minlength=len(uniq)))
