"""Observation data, coordinatewise ranks and pseudo-observations."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FIXTURE_NAME",
    "Convention",
    "ObservationSet",
    "PseudoObservations",
    "RankMatrix",
    "compute_ranks",
    "fixture_observations",
    "load_observations",
    "pseudo_observations",
    "resolve_dataset",
]

FIXTURE_NAME = "cottin-pfeifer-4.2"

# Cottin & Pfeifer (2014), Example 4.2: 20 bivariate losses (x, y).
_FIXTURE_VALUES = (
    (0.468, 0.966),
    (9.951, 2.679),
    (0.866, 0.897),
    (6.731, 2.249),
    (1.421, 0.956),
    (2.040, 1.141),
    (2.967, 1.707),
    (1.200, 1.008),
    (0.426, 1.065),
    (1.946, 1.162),
    (0.676, 0.918),
    (1.184, 1.336),
    (0.960, 0.933),
    (1.972, 1.077),
    (1.549, 1.041),
    (0.819, 0.899),
    (0.063, 0.710),
    (1.280, 1.118),
    (0.824, 0.894),
    (0.227, 0.837),
)


class DataError(ValueError):
    """Raised for malformed observation input."""


class Convention(enum.Enum):
    R_OVER_N = "r/n"
    R_OVER_N_PLUS_1 = "r/(n+1)"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ObservationSet:
    """An ``n x d`` matrix of finite real observations, row order preserved."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("observations must form a 2-D matrix")
        if v.shape[1] < 2:
            raise DataError(f"d < 2: got {v.shape[1]} column(s)")
        if v.shape[0] < 2:
            raise DataError(f"n < 2: got {v.shape[0]} row(s)")
        bad = ~np.isfinite(v)
        if bad.any():
            row = int(np.argwhere(bad)[0, 0]) + 1
            raise DataError(f"non-finite value in row {row}")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RankMatrix:
    """Ordinal ranks in ``{1, ..., n}``; every column is a permutation."""

    ranks: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranks)
        if r.ndim != 2 or r.shape[0] < 1:
            raise DataError("ranks must form a non-empty 2-D matrix")
        r = r.astype(np.int64)
        expected = np.arange(1, r.shape[0] + 1)
        for k in range(r.shape[1]):
            if not np.array_equal(np.sort(r[:, k]), expected):
                raise DataError(f"rank column {k + 1} is not a permutation of 1..{r.shape[0]}")
        object.__setattr__(self, "ranks", _readonly(r))

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def d(self) -> int:
        return self.ranks.shape[1]


@dataclass(frozen=True)
class PseudoObservations:
    values: np.ndarray
    convention: Convention = Convention.R_OVER_N


def fixture_observations() -> ObservationSet:
    """The 20-point example dataset shipped with the package."""
    return ObservationSet(np.array(_FIXTURE_VALUES))


def load_observations(path, has_header: bool = False) -> ObservationSet:
    """Read a comma-separated file with one observation per row.

    Blank lines are skipped. Errors name the offending (1-based) file row.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows = []
    width = None
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if has_header and lineno == 1:
            continue
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise DataError(f"row {lineno}: non-numeric cell") from None
        if not all(np.isfinite(values)):
            raise DataError(f"row {lineno}: non-finite value")
        if width is None:
            width = len(values)
            if width < 2:
                raise DataError(f"row {lineno}: d < 2 (single column)")
        elif len(values) != width:
            raise DataError(f"row {lineno}: ragged row, expected {width} columns, got {len(values)}")
        rows.append(values)

    if len(rows) < 2:
        raise DataError(f"n < 2: found {len(rows)} data row(s)")
    return ObservationSet(np.array(rows))


def resolve_dataset(name: str, has_header: bool = False) -> ObservationSet:
    """Resolve ``fixture:<name>`` (or the bare fixture name) or a CSV path."""
    key = name[len("fixture:"):] if name.startswith("fixture:") else name
    if key == FIXTURE_NAME:
        return fixture_observations()
    if name.startswith("fixture:"):
        raise DataError(f"unknown fixture {key!r}")
    return load_observations(name, has_header=has_header)


def compute_ranks(obs: ObservationSet) -> RankMatrix:
    """Stable ordinal ranks per column; equal values are ranked by row order."""
    v = obs.values
    ranks = np.empty(v.shape, dtype=np.int64)
    for k in range(v.shape[1]):
        order = np.argsort(v[:, k], kind="stable")
        ranks[order, k] = np.arange(1, v.shape[0] + 1)
    return RankMatrix(ranks)


def pseudo_observations(ranks: RankMatrix, convention: Convention = Convention.R_OVER_N) -> PseudoObservations:
    denom = ranks.n if convention is Convention.R_OVER_N else ranks.n + 1
    return PseudoObservations(_readonly(ranks.ranks / denom), convention)
