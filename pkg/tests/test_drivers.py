import math

import numpy as np
import pytest
from scipy import stats

from ipucopula.data import RankMatrix
from ipucopula.drivers import (
    BaseKind,
    DriverSpec,
    MixtureLaw,
    SparseLaw,
    bernstein,
    comonotone,
    driver_pmf,
    independence,
    quantile_transform,
    rectangle_mass,
    sample_base,
    sample_driver,
    segment_point,
    shuffle_of_m,
    truncated_law,
    worst_case_shuffle,
)
from ipucopula.families import driver_cdf, driver_tail, marginal_alpha, nb, poisson


def identity_ranks(n, d=2):
    return RankMatrix(np.arange(1, n + 1)[:, None].repeat(d, axis=1))


@pytest.fixture(scope="module")
def bases(ranks):
    return {
        "shuffle": shuffle_of_m(ranks),
        "wc": worst_case_shuffle(ranks),
        "wc1": worst_case_shuffle(ranks, corner_size=1),
        "bernstein": bernstein(ranks),
        "comonotone": comonotone(2),
        "independence": independence(2),
    }


def test_shuffle_cells(ranks):
    base = shuffle_of_m(ranks)
    assert base.n == 20 and base.kind is BaseKind.SHUFFLE_M
    assert tuple(base.ranks[1]) == (20, 20)
    assert not base.negative.any()
    assert rectangle_mass(base, [19 / 20, 19 / 20], [1, 1]) == pytest.approx(1 / 20)


def test_single_cell_shuffle_is_m():
    base = shuffle_of_m(RankMatrix(np.array([[1, 1, 1]])))
    for lo, hi in [([0, 0.2, 0.1], [0.3, 1, 1]), ([0.5] * 3, [0.9] * 3)]:
        assert rectangle_mass(base, lo, hi) == pytest.approx(rectangle_mass(comonotone(3), lo, hi))


def test_identity_shuffle_is_diagonal(rng):
    base = shuffle_of_m(identity_ranks(7, 3))
    u = sample_base(base, rng, size=1000)
    np.testing.assert_allclose(u[:, 0], u[:, 1])
    np.testing.assert_allclose(u[:, 0], u[:, 2])


def test_worst_case_auto_corner(ranks):
    wc = worst_case_shuffle(ranks)
    # observations 7, 4, 2 hold ranks 18, 19, 20 in both columns
    corner = np.flatnonzero(wc.negative)
    assert corner.tolist() == [1, 3, 6]
    pairs = sorted(map(tuple, wc.ranks[corner]))
    assert pairs == [(18, 20), (19, 19), (20, 18)]
    rest = np.setdiff1d(np.arange(20), corner)
    np.testing.assert_array_equal(wc.ranks[rest], ranks.ranks[rest])


def test_worst_case_full_square():
    wc = worst_case_shuffle(identity_ranks(4), corner_size=4)
    assert sorted(map(tuple, wc.ranks)) == [(1, 4), (2, 3), (3, 2), (4, 1)]
    assert wc.negative.all()


def test_worst_case_errors(ranks):
    # observation 6 has r1 = 17 but r2 = 15
    with pytest.raises(ValueError, match="top-4"):
        worst_case_shuffle(ranks, corner_size=4)
    with pytest.raises(ValueError, match="no corner"):
        worst_case_shuffle(RankMatrix(np.array([[1, 2], [2, 1]])))
    with pytest.raises(ValueError, match="bivariate"):
        worst_case_shuffle(identity_ranks(3, 3))


def test_negative_slopes_only_in_worst_case(ranks):
    from ipucopula.drivers import BaseCopula

    with pytest.raises(ValueError):
        BaseCopula(BaseKind.SHUFFLE_M, 2, ranks.ranks, np.ones(20, dtype=bool))


def test_worst_case_keeps_marginal_ranks(ranks, bases):
    for k in range(2):
        assert sorted(bases["wc"].ranks[:, k]) == sorted(bases["shuffle"].ranks[:, k])


def test_bernstein_single_cell_is_independence():
    base = bernstein(RankMatrix(np.array([[1, 1]])))
    assert rectangle_mass(base, [0.1, 0.3], [0.6, 0.4]) == pytest.approx(0.05)


def test_segment_point_examples(bases):
    np.testing.assert_allclose(segment_point(bases["shuffle"], 1, 0.3), [0.965, 0.965])
    wc = bases["wc"]
    cell = int(np.flatnonzero((wc.ranks[:, 0] == 20) & (wc.ranks[:, 1] == 18))[0])
    np.testing.assert_allclose(segment_point(wc, cell, 0.3), [0.965, 0.885])


def test_comonotone_sample_repeats_one_uniform(rng):
    u = sample_base(comonotone(3), rng, size=100)
    assert np.all(u == u[:, :1])
    assert segment_point(comonotone(3), 0, 0.42).tolist() == [0.42, 0.42, 0.42]


def test_sample_base_single_point_shape(bases, rng):
    for base in bases.values():
        assert sample_base(base, rng).shape == (2,)


@pytest.mark.parametrize("name", ["shuffle", "wc", "wc1", "bernstein", "comonotone", "independence"])
def test_uniform_marginals(bases, name, rng):
    u = sample_base(bases[name], rng, size=100_000)
    assert np.all((u > 0) & (u < 1))
    for k in range(2):
        assert stats.kstest(u[:, k], "uniform").statistic < 1.95 / math.sqrt(1e5)


@pytest.mark.parametrize("name", ["shuffle", "wc", "bernstein", "comonotone", "independence"])
def test_rectangle_mass_matches_frequencies(bases, name):
    base = bases[name]
    rng = np.random.default_rng(11)
    u = sample_base(base, rng, size=100_000)
    for _ in range(50):
        a, b = np.sort(rng.random((2, 2)), axis=0)
        p = rectangle_mass(base, a, b)
        freq = np.mean(np.all((u >= a) & (u < b), axis=1))
        se = math.sqrt(max(p * (1 - p), 1e-12) / len(u))
        assert abs(freq - p) <= 4 * se + 1e-12


def test_rectangle_mass_examples(bases):
    assert rectangle_mass(comonotone(2), [0, 0.2], [0.3, 1]) == pytest.approx(0.1)
    for base in bases.values():
        assert rectangle_mass(base, [0, 0], [1, 1]) == pytest.approx(1.0, abs=1e-12)


def test_rectangle_mass_rejects_malformed(bases):
    with pytest.raises(ValueError, match="malformed"):
        rectangle_mass(bases["shuffle"], [0.5, 0], [0.2, 1])
    with pytest.raises(ValueError):
        rectangle_mass(bases["shuffle"], [0], [1])


def test_sample_driver_examples(ranks):
    spec = DriverSpec(comonotone(2), (nb(5), nb(5)))
    assert quantile_transform(spec, [0.5, 0.5]).tolist() == [5, 5]
    spec = DriverSpec(shuffle_of_m(ranks), (nb(5), nb(5)))
    u = segment_point(spec.base, 16, 0.5)
    np.testing.assert_allclose(u, [0.025, 0.025])
    assert quantile_transform(spec, u).tolist() == [0, 0]


def test_independent_driver_uncorrelated(rng):
    z = sample_driver(DriverSpec(independence(2), (poisson(6), poisson(6))), rng, size=100_000)
    assert abs(np.corrcoef(z.T)[0, 1]) < 0.01


def test_diagonal_cells_give_equal_drivers(ranks, rng):
    spec = DriverSpec(shuffle_of_m(ranks), (nb(5), nb(5)))
    u = sample_base(spec.base, rng, size=20_000)
    cell_r1 = np.ceil(u[:, 0] * 20)
    cell_r2 = np.ceil(u[:, 1] * 20)
    z = quantile_transform(spec, u)
    diag = cell_r1 == cell_r2
    assert diag.any()
    np.testing.assert_array_equal(z[diag, 0], z[diag, 1])


def test_driver_pmf_examples(ranks):
    spec = DriverSpec(comonotone(2), (nb(5), nb(5)))
    assert driver_pmf(spec, [0, 0]) == pytest.approx(1 / 6)
    assert driver_pmf(spec, [0, 5]) == 0.0
    for base in (shuffle_of_m(ranks), bernstein(ranks), worst_case_shuffle(ranks), independence(2)):
        spec = DriverSpec(base, (nb(5), poisson(6)))
        # Poisson tail beyond 400 is below 1e-26
        total = sum(driver_pmf(spec, [0, j]) for j in range(400))
        assert total == pytest.approx(marginal_alpha(nb(5), 0), abs=1e-9)


def test_driver_pmf_matches_sampling(ranks, rng):
    spec = DriverSpec(worst_case_shuffle(ranks, 1), (nb(5), poisson(6)))
    z = sample_driver(spec, rng, size=200_000)
    for i in [(0, 0), (3, 2), (40, 15), (5, 9)]:
        p = driver_pmf(spec, i)
        freq = np.mean(np.all(z == i, axis=1))
        assert abs(freq - p) <= 4 * math.sqrt(max(p * (1 - p), 1e-12) / len(z)) + 1e-12


@pytest.mark.parametrize("name", ["shuffle", "wc", "wc1", "bernstein", "comonotone", "independence"])
@pytest.mark.parametrize("a", [6, 15])
def test_truncated_law_sums_to_one(bases, name, a):
    fam = poisson(a)
    spec = DriverSpec(bases[name], (fam, fam))
    cut = 0
    while driver_tail(fam, cut) >= 1e-10:
        cut += 1
    law = truncated_law(spec, [cut, cut])
    if isinstance(law, SparseLaw):
        total = law.masses.sum()
    else:
        total = np.mean(np.prod([w.sum(axis=1) for w in law.weights], axis=0))
    assert 1 - 1e-8 <= total <= 1 + 1e-12


@pytest.mark.parametrize("name", ["shuffle", "wc", "wc1", "comonotone"])
def test_segment_walk_agrees_with_rectangle_mass(bases, name):
    spec = DriverSpec(bases[name], (nb(5), poisson(6)))
    law = truncated_law(spec, [60, 40])
    assert isinstance(law, SparseLaw)
    table = {tuple(i): m for i, m in zip(law.indices.tolist(), law.masses)}
    for i1 in range(0, 61, 3):
        for i2 in range(0, 41):
            assert table.get((i1, i2), 0.0) == pytest.approx(driver_pmf(spec, [i1, i2]), abs=1e-13)


def test_mixture_law_agrees_with_rectangle_mass(bases):
    spec = DriverSpec(bases["bernstein"], (nb(5), poisson(6)))
    law = truncated_law(spec, [30, 30])
    assert isinstance(law, MixtureLaw)
    w1, w2 = law.weights
    for i1, i2 in [(0, 0), (4, 7), (30, 2), (12, 30)]:
        p = np.mean(w1[:, i1] * w2[:, i2])
        assert p == pytest.approx(driver_pmf(spec, [i1, i2]), rel=1e-10, abs=1e-15)


def test_driver_spec_dimension_check(ranks):
    with pytest.raises(ValueError):
        DriverSpec(shuffle_of_m(ranks), (nb(5),))
