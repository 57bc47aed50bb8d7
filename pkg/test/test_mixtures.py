"""
Test exponential scale mixtures.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from expo_fdr.base import FdrDomainError, MixingDistribution, SampleBatch, SparsityBall
from expo_fdr.mixtures import (
    ExpScaleMixture,
    calibrated_eps,
    empirical_survival,
    frequentist_mixture,
    ks_distance_to_exp,
    log_moment,
    make_two_point,
    massart_tail,
    mixture_cdf,
    mixture_density,
    mixture_survival,
    sample_mixture,
    stochastically_dominates,
    sup_distance,
)
from expo_fdr.seeding import derive_seed

EPS = st.floats(min_value=1e-4, max_value=0.5)
MU = st.floats(min_value=1.5, max_value=100.0)


@pytest.fixture(scope="module", name="sparse_mixture")
def sparse_mixture_fixture() -> ExpScaleMixture:
    return ExpScaleMixture(make_two_point(0.01, 10.0))


def test_from_points_merges_and_normalizes() -> None:
    F = MixingDistribution.from_points([10.0, 1.0, 10.0, 3.0], [1.0, 3.0, 1.0, 0.0])
    np.testing.assert_array_equal(F.support, [1.0, 10.0])
    np.testing.assert_allclose(F.weights, [0.6, 0.4])


@pytest.mark.parametrize(
    "support, weights",
    [
        ([0.5, 2.0], [0.5, 0.5]),
        ([1.0, 2.0], [0.5, -0.5]),
        ([1.0, 2.0], [0.0, 0.0]),
        ([1.0, math.nan], [0.5, 0.5]),
        ([], []),
    ],
)
def test_from_points_rejects_invalid(support: list[float], weights: list[float]) -> None:
    with pytest.raises(FdrDomainError):
        MixingDistribution.from_points(support, weights)


def test_two_point_collapses_to_null() -> None:
    assert make_two_point(0.0, 10.0).is_null
    assert make_two_point(0.3, 1.0).is_null
    assert not make_two_point(0.3, 2.0).is_null


@pytest.mark.parametrize("eps, mu", [(-0.1, 2.0), (1.1, 2.0), (0.1, 0.5)])
def test_two_point_rejects_invalid(eps: float, mu: float) -> None:
    with pytest.raises(FdrDomainError):
        make_two_point(eps, mu)


def test_survival_and_cdf(sparse_mixture: ExpScaleMixture) -> None:
    assert mixture_survival(sparse_mixture, 0.0) == pytest.approx(1.0)
    for t in (0.1, 1.0, 5.0, 50.0):
        expected = 0.99 * math.exp(-t) + 0.01 * math.exp(-t / 10.0)
        assert mixture_survival(sparse_mixture, t) == pytest.approx(expected, rel=1e-14)
        assert mixture_cdf(sparse_mixture, t) + mixture_survival(sparse_mixture, t) == (
            pytest.approx(1.0, abs=1e-15)
        )
    with pytest.raises(FdrDomainError):
        mixture_survival(sparse_mixture, -1.0)


def test_mixture_density() -> None:
    null = ExpScaleMixture(MixingDistribution.point_mass(1.0))
    assert mixture_density(null, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    G = ExpScaleMixture(MixingDistribution.from_points([1.0, 2.0], [0.5, 0.5]))
    assert mixture_density(G, 1e-12) == pytest.approx(0.75, abs=1e-11)
    total, _ = integrate.quad(lambda x: mixture_density(G, x), 0.0, np.inf)
    assert total == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(FdrDomainError):
        mixture_density(G, 0.0)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(eps=EPS, mu=MU, t=st.floats(min_value=0.0, max_value=200.0))
def test_survival_between_null_and_largest_mean(eps: float, mu: float, t: float) -> None:
    G = ExpScaleMixture(make_two_point(eps, mu))
    survival = mixture_survival(G, t)
    assert math.exp(-t) * (1.0 - 1e-12) <= survival <= math.exp(-t / mu) * (1.0 + 1e-12)


def test_survival_bounds_are_attained() -> None:
    for t in (0.5, 3.0, 12.0):
        null = ExpScaleMixture(MixingDistribution.point_mass(1.0))
        top = ExpScaleMixture(MixingDistribution.point_mass(7.0))
        assert mixture_survival(null, t) == pytest.approx(math.exp(-t), rel=1e-15)
        assert mixture_survival(top, t) == pytest.approx(math.exp(-t / 7.0), rel=1e-15)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(eps=EPS, mu=MU, t=st.floats(min_value=0.0, max_value=30.0))
def test_log_survival_ratio_matches_direct(eps: float, mu: float, t: float) -> None:
    G = ExpScaleMixture(make_two_point(eps, mu))
    direct = math.log(G.survival(t) / math.exp(-t))
    assert G.log_survival_ratio(t) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_log_survival_ratio_large_t() -> None:
    G = ExpScaleMixture(make_two_point(0.01, 10.0))
    # Both survival functions underflow here; the ratio does not.
    t = 2000.0
    assert G.log_survival_ratio(t) == pytest.approx(math.log(0.01) + 0.9 * t, rel=1e-12)


def test_sampling_is_deterministic(sparse_mixture: ExpScaleMixture) -> None:
    first = sparse_mixture.sample(1000, seed=7)
    second = sample_mixture(sparse_mixture.mixing, 1000, seed=7)
    other = sparse_mixture.sample(1000, seed=8)
    np.testing.assert_array_equal(first.x, second.x)
    np.testing.assert_array_equal(first.mu, second.mu)
    assert not np.array_equal(first.x, other.x)
    assert set(np.unique(first.mu)) <= {1.0, 10.0}


def test_sample_mean_matches_mixture() -> None:
    G = ExpScaleMixture(make_two_point(0.2, 5.0))
    batch = G.sample(1_000_000, seed=derive_seed(1, 2))
    # E[X] = 0.8 + 0.2 * 5 with a standard error near 0.003.
    assert batch.x.mean() == pytest.approx(1.8, abs=0.02)


def test_signal_fraction_of_large_sample(sparse_mixture: ExpScaleMixture) -> None:
    batch = sparse_mixture.sample(1_000_000, seed=derive_seed(3, 0))
    # Four binomial standard errors of sqrt(0.01 * 0.99 / 1e6).
    assert np.mean(batch.mu == 10.0) == pytest.approx(0.01, abs=4e-4)


@pytest.mark.slow
def test_empirical_survival_is_uniformly_close() -> None:
    G = ExpScaleMixture(make_two_point(0.05, 20.0))
    n, reps = 100_000, 200
    close = [
        sup_distance(G.sample(n, derive_seed(11, rep)), G) <= 5.0 / math.sqrt(n)
        for rep in range(reps)
    ]
    assert np.mean(close) >= 0.99


def test_calibrated_eps() -> None:
    ball = SparsityBall(1.0, 1e-3)
    assert calibrated_eps(ball, 10.0) == pytest.approx(1e-3 / math.log(10.0))
    with pytest.raises(FdrDomainError):
        calibrated_eps(SparsityBall(1.0, 0.5), 1.1)
    with pytest.raises(FdrDomainError):
        calibrated_eps(ball, 1.0)


def test_log_moment_of_calibrated_mixture() -> None:
    ball = SparsityBall(1.5, 1e-3)
    F = make_two_point(calibrated_eps(ball, 20.0), 20.0)
    assert log_moment(F, 1.5) == pytest.approx(ball.budget, rel=1e-12)


def test_log_moment_example() -> None:
    F = MixingDistribution.from_points([1.0, math.exp(2.0)], [0.5, 0.5])
    assert log_moment(F, 2.0) == pytest.approx(2.0, rel=1e-12)
    assert log_moment(MixingDistribution.point_mass(1.0), 0.7) == 0.0


@settings(max_examples=50, deadline=None, derandomize=True)
@given(
    alpha=st.floats(min_value=0.01, max_value=0.99),
    first=st.tuples(EPS, MU),
    second=st.tuples(EPS, MU),
    p=st.floats(min_value=0.2, max_value=2.0),
)
def test_log_moment_is_linear_in_weights(
    alpha: float, first: tuple[float, float], second: tuple[float, float], p: float
) -> None:
    F1, F2 = make_two_point(*first), make_two_point(*second)
    blend = MixingDistribution.from_points(
        np.concatenate([F1.support, F2.support]),
        np.concatenate([alpha * F1.weights, (1.0 - alpha) * F2.weights]),
    )
    expected = alpha * log_moment(F1, p) + (1.0 - alpha) * log_moment(F2, p)
    assert log_moment(blend, p) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_frequentist_mixture() -> None:
    F = frequentist_mixture([1.0, 10.0, 1.0, 10.0, 1.0])
    np.testing.assert_array_equal(F.support, [1.0, 10.0])
    np.testing.assert_allclose(F.weights, [0.6, 0.4])
    with pytest.raises(FdrDomainError):
        frequentist_mixture([])


def test_empirical_survival_counts_ties() -> None:
    batch = SampleBatch.from_observations([0.5, 1.0, 2.0])
    assert empirical_survival(batch, 1.0) == pytest.approx(2.0 / 3.0)
    assert empirical_survival(batch, 0.0) == 1.0
    assert empirical_survival(batch, 2.5) == 0.0


def test_sup_distance_single_point() -> None:
    batch = SampleBatch.from_observations([1.0])
    G = ExpScaleMixture(MixingDistribution.point_mass(1.0))
    assert sup_distance(batch, G) == pytest.approx(1.0 - math.exp(-1.0))


def test_massart_tail() -> None:
    assert massart_tail(0.0) == 1.0
    assert massart_tail(1.0) == pytest.approx(2.0 * math.exp(-2.0))
    with pytest.raises(FdrDomainError):
        massart_tail(-1.0)


def test_massart_bound_holds() -> None:
    G = ExpScaleMixture(make_two_point(0.1, 10.0))
    n, reps, s = 1000, 200, 1.2
    hits = [
        math.sqrt(n) * sup_distance(G.sample(n, derive_seed(5, rep)), G) >= s
        for rep in range(reps)
    ]
    bound = massart_tail(s)
    assert np.mean(hits) <= bound + 3.0 * math.sqrt(bound * (1.0 - bound) / reps)


def test_stochastic_dominance() -> None:
    null = ExpScaleMixture(MixingDistribution.point_mass(1.0))
    sparse = ExpScaleMixture(make_two_point(0.1, 10.0))
    denser = ExpScaleMixture(make_two_point(0.2, 10.0))
    assert stochastically_dominates(sparse, null)
    assert stochastically_dominates(denser, sparse)
    assert not stochastically_dominates(null, sparse)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(eps=EPS, mu=MU)
def test_ks_distance_two_point_closed_form(eps: float, mu: float) -> None:
    F = make_two_point(eps, mu)
    G = ExpScaleMixture(F)
    grid = np.linspace(0.0, 20.0 * mu, 200_001)
    on_grid = float(np.max(G.survival_array(grid) - np.exp(-grid)))
    distance = ks_distance_to_exp(F)
    assert distance >= on_grid - 1e-15
    assert distance == pytest.approx(on_grid, rel=1e-5, abs=1e-12)


def test_ks_distance_multi_point() -> None:
    F = MixingDistribution.from_points([1.0, 5.0, 50.0], [0.9, 0.05, 0.05])
    G = ExpScaleMixture(F)
    grid = np.linspace(0.0, 2500.0, 400_001)
    on_grid = float(np.max(G.survival_array(grid) - np.exp(-grid)))
    distance = ks_distance_to_exp(F)
    assert distance >= on_grid - 1e-15
    assert distance == pytest.approx(on_grid, rel=1e-4)
    assert ks_distance_to_exp(MixingDistribution.point_mass(1.0)) == 0.0
