"""
Test the risk calculus.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from expo_fdr.base import FdrConfig, FdrDomainError, MixingDistribution, SparsityBall
from expo_fdr.fdr import fdr_functional
from expo_fdr.mixtures import ExpScaleMixture, calibrated_two_point, make_two_point
from expo_fdr.risk import (
    KNEE_INTEGRAL_CONSTANT,
    NULL_VARIANCE,
    asymptotic_minimax_risk,
    bayes_least_favorable,
    bayes_rule_log,
    bias_proxy,
    bias_tail_bound,
    ideal_fdr_risk,
    knee_integral_rate,
    least_favorable_mus,
    lemma21_integral,
    log_mse_loss,
    minimax_threshold,
    threshold_bayes_risk,
    two_point_bayes_risk,
    two_point_bayes_risk_direct,
    variance_approx,
    variance_increment,
    variance_proxy,
)
from expo_fdr.seeding import make_rng

EULER_GAMMA = 0.5772156649015329


def test_null_variance() -> None:
    assert variance_proxy(0.0, 1.0) == pytest.approx(1.9781112, abs=1e-6)
    assert variance_proxy(0.0, 1.0) == pytest.approx(EULER_GAMMA**2 + math.pi**2 / 6.0, abs=1e-8)
    assert NULL_VARIANCE == pytest.approx(EULER_GAMMA**2 + math.pi**2 / 6.0, rel=1e-15)


@pytest.mark.parametrize("s", [0.001, 0.3, 1.0, 2.5, 12.0])
def test_standard_variance_against_direct_quadrature(s: float) -> None:
    direct, _ = integrate.quad(lambda x: math.log(x) ** 2 * math.exp(-x), s, np.inf, limit=500)
    assert variance_proxy(s, 1.0) == pytest.approx(direct, rel=1e-7)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(t=st.floats(min_value=0.01, max_value=30.0), mu=st.floats(min_value=1.0, max_value=1000.0))
def test_variance_scale_identity(t: float, mu: float) -> None:
    assert variance_proxy(t, mu) == pytest.approx(variance_proxy(t / mu, 1.0), abs=1e-12)
    # The increment is integrated on its own, so this checks the two quadratures agree.
    total = variance_proxy(t, 1.0) + variance_increment(t, mu)
    assert variance_proxy(t, mu) == pytest.approx(total, abs=1e-9)


def test_variance_decreases_in_t() -> None:
    values = [variance_proxy(t, 10.0) for t in (0.0, 1.0, 5.0, 20.0, 80.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_variance_approx_leading_order() -> None:
    t = 40.0
    assert variance_proxy(t, 1.0) / variance_approx(t) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(FdrDomainError):
        variance_approx(0.0)


def test_bias_proxy() -> None:
    assert bias_proxy(0.0, 10.0) == 0.0
    assert bias_proxy(5.0, 1.0) == 0.0
    assert bias_proxy(5.0, 10.0) == pytest.approx(math.log(10.0) ** 2 * (1.0 - math.exp(-0.5)))
    with pytest.raises(FdrDomainError):
        bias_proxy(-1.0, 2.0)
    with pytest.raises(FdrDomainError):
        bias_proxy(1.0, 0.5)


def test_threshold_bayes_risk_decomposition() -> None:
    F = make_two_point(0.1, 10.0)
    risk = threshold_bayes_risk(3.0, F)
    bias = 0.1 * bias_proxy(3.0, 10.0)
    variance = 0.9 * variance_proxy(3.0, 1.0) + 0.1 * variance_proxy(3.0, 10.0)
    assert risk.bias == pytest.approx(bias)
    assert risk.variance == pytest.approx(variance)
    assert risk.total == pytest.approx(bias + variance)


def test_ideal_fdr_risk_uses_functional() -> None:
    F = make_two_point(0.01, 10.0)
    cfg = FdrConfig(0.5)
    threshold = fdr_functional(ExpScaleMixture(F), cfg)
    assert ideal_fdr_risk(F, cfg) == threshold_bayes_risk(threshold, F)


@settings(max_examples=20, deadline=None, derandomize=True)
@given(eps=st.floats(min_value=0.01, max_value=0.5), mu=st.floats(min_value=1.5, max_value=50.0))
def test_two_point_bayes_risk_forms_agree(eps: float, mu: float) -> None:
    assert two_point_bayes_risk(eps, mu) == pytest.approx(
        two_point_bayes_risk_direct(eps, mu), rel=1e-7
    )


def test_two_point_bayes_risk_against_posterior_mean() -> None:
    # Bayes risk as the expected squared error of the posterior mean of log μ.
    eps, mu = 0.1, 8.0
    log_mu = math.log(mu)

    def integrand(x: float) -> float:
        post = bayes_rule_log(x, eps, mu)
        null_part = (1.0 - eps) * math.exp(-x) * post**2
        signal_part = eps * math.exp(-x / mu) / mu * (post - log_mu) ** 2
        return null_part + signal_part

    expected, _ = integrate.quad(integrand, 0.0, 400.0, limit=500)
    assert two_point_bayes_risk(eps, mu) == pytest.approx(expected, rel=1e-6)


def test_two_point_bayes_risk_degenerate() -> None:
    assert two_point_bayes_risk(0.0, 10.0) == 0.0
    assert two_point_bayes_risk(0.2, 1.0) == 0.0
    with pytest.raises(FdrDomainError):
        two_point_bayes_risk(1.0, 10.0)


def test_bayes_rule_log_limits() -> None:
    eps, mu = 0.01, 20.0
    assert bayes_rule_log(0.0, eps, mu) < 0.01 * math.log(mu)
    assert bayes_rule_log(500.0, eps, mu) == pytest.approx(math.log(mu))
    values = [bayes_rule_log(x, eps, mu) for x in (0.0, 2.0, 5.0, 10.0)]
    assert all(a < b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("a", [1e-6, 1e-3, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("d", [3.0, 5.0, 20.0, 100.0])
def test_lemma21_integral_rate(a: float, d: float) -> None:
    value = lemma21_integral(a, d)
    assert 0.0 < value < d
    assert abs(value / d - 1.0) <= KNEE_INTEGRAL_CONSTANT * knee_integral_rate(a, d)


@pytest.mark.parametrize("a, d", [(0.0, 3.0), (1.0, 1.0)])
def test_lemma21_integral_rejects_invalid(a: float, d: float) -> None:
    with pytest.raises(FdrDomainError):
        lemma21_integral(a, d)


def test_bayes_risk_rate_trend() -> None:
    ratios = []
    knee_factors = []
    for eta in (1e-2, 1e-3, 1e-4, 1e-6):
        ball = SparsityBall(1.0, eta)
        eps, mu = bayes_least_favorable(ball)
        assert eps * math.log(mu) == pytest.approx(eta, rel=1e-12)
        risk = two_point_bayes_risk(eps, mu)
        ratios.append(risk / asymptotic_minimax_risk(ball))
        knee_factors.append(risk / (eps * math.log(mu) ** 2))
    assert all(0.0 < r <= 3.0 for r in ratios)
    # Away from the log-scale corrections the risk approaches ε·log²μ.
    assert abs(knee_factors[-1] - 1.0) < abs(knee_factors[0] - 1.0)


def test_minimax_threshold_and_rate() -> None:
    ball = SparsityBall(1.0, 1e-3)
    assert minimax_threshold(ball) == pytest.approx(10.2306, abs=1e-4)
    assert asymptotic_minimax_risk(ball) == pytest.approx(1e-3 * math.log(math.log(1e3)))
    with pytest.raises(FdrDomainError):
        minimax_threshold(SparsityBall(1.0, 0.1))


def test_least_favorable_mus() -> None:
    mu_b, mu_v = least_favorable_mus(SparsityBall(1.0, 1e-6))
    assert mu_b == pytest.approx(5.2614, abs=1e-3)
    assert mu_v == pytest.approx(36.278, abs=1e-2)
    mu_b, _ = least_favorable_mus(SparsityBall(1.0, 1e-3))
    assert mu_b == pytest.approx(3.574, abs=1e-3)


def test_bias_tail_bound_holds() -> None:
    cfg = FdrConfig(0.5)
    F = make_two_point(0.01, 10.0)
    T = fdr_functional(ExpScaleMixture(F), cfg)
    for tau in (0.5, 1.0, 2.0, 4.0, 5.0):
        tail = 0.01 * math.log(10.0) ** 2 * (math.exp(-tau / 10.0) - math.exp(-T / 10.0))
        assert tail <= bias_tail_bound(tau, cfg)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(eps=st.floats(min_value=1e-4, max_value=0.5), mu=st.floats(min_value=1.5, max_value=100.0))
def test_bayes_risk_below_every_threshold(eps: float, mu: float) -> None:
    F = make_two_point(eps, mu)
    bayes = two_point_bayes_risk(eps, mu)
    for t in np.linspace(0.0, 4.0 * mu * math.log(mu / eps), 41):
        assert bayes <= threshold_bayes_risk(float(t), F).total * (1.0 + 1e-9)


def test_bias_tail_bound_on_calibrated_mixtures() -> None:
    rng = make_rng(56)
    for _ in range(50):
        ball = SparsityBall(1.0, float(10.0 ** rng.uniform(-4.0, -1.5)))
        mu = float(np.exp(rng.uniform(math.log(1.5), math.log(500.0))))
        cfg = FdrConfig(float(rng.uniform(0.05, 0.95)))
        F = calibrated_two_point(ball, mu)
        eps = float(F.weights[F.support == mu][0])
        T = fdr_functional(ExpScaleMixture(F), cfg)
        for frac in (0.1, 0.5, 0.9, 0.99):
            tau = frac * T
            tail = eps * math.log(mu) ** 2 * (math.exp(-tau / mu) - math.exp(-T / mu))
            assert tail <= bias_tail_bound(tau, cfg)


def test_log_mse_loss() -> None:
    truth = np.array([1.0, math.e, 1.0])
    estimate = np.array([1.0, 1.0, math.e])
    assert log_mse_loss(estimate, truth) == pytest.approx(2.0 / 3.0)
    with pytest.raises(FdrDomainError):
        log_mse_loss(estimate[:2], truth)
    with pytest.raises(FdrDomainError):
        log_mse_loss(np.array([0.0, 1.0, 1.0]), truth)


@pytest.mark.slow
@pytest.mark.parametrize(
    "eps, mu, threshold",
    [
        (0.01, 10.0, 5.0),
        (0.01, 10.0, 8.0),
        (0.05, 3.0, 4.0),
        (0.05, 30.0, 6.0),
        (0.1, 5.0, 2.0),
        (0.1, 100.0, 10.0),
        (0.001, 20.0, 9.0),
        (0.2, 2.0, 1.0),
        (0.3, 50.0, 3.0),
        (0.02, 200.0, 12.0),
    ],
)
def test_threshold_bayes_risk_matches_simulation(eps: float, mu: float, threshold: float) -> None:
    F = make_two_point(eps, mu)
    batch = ExpScaleMixture(F).sample(1_000_000, seed=41)
    estimate = np.where(batch.x >= threshold, batch.x, 1.0)
    losses = (np.log(estimate) - np.log(batch.mu)) ** 2
    se = losses.std(ddof=1) / math.sqrt(losses.size)
    assert abs(losses.mean() - threshold_bayes_risk(threshold, F).total) <= 5.0 * se


def test_point_mass_risk_is_variance_only() -> None:
    F = MixingDistribution.point_mass(math.e)
    risk = threshold_bayes_risk(2.0, F)
    assert risk.bias == pytest.approx(1.0 - math.exp(-2.0 / math.e))
    assert risk.variance == pytest.approx(variance_proxy(2.0 / math.e, 1.0))
