"""Infinite partition-of-unity (IPU) copulas with data-driven drivers."""

from .data import (
    Convention,
    ObservationSet,
    RankMatrix,
    compute_ranks,
    fixture_observations,
    load_observations,
    pseudo_observations,
    resolve_dataset,
)
from .drivers import (
    BaseCopula,
    BaseKind,
    DriverSpec,
    bernstein,
    comonotone,
    driver_pmf,
    independence,
    rectangle_mass,
    sample_base,
    sample_driver,
    shuffle_of_m,
    worst_case_shuffle,
)
from .engine import (
    IpuModel,
    TruncationPolicy,
    TruncationWarning,
    density,
    density_grid,
    sample_copula,
    simulate,
)
from .families import FamilyKind, FamilyParams, nb, poisson
from .risk import (
    MarginalModel,
    VarReport,
    aggregate_var,
    empirical_var,
    fit_frechet,
    fit_lognormal,
    quantile_marginal,
    quantile_table,
)
from .tails import empirical_lambda_u, lambda_u_nb_asymptotic, lambda_u_nb_exact

__version__ = "0.1.0"
