"""
Risk calculus module.
"""

import math
from collections.abc import Callable

import numpy as np
from scipy import integrate, special

from expo_fdr.base import (
    FdrConfig,
    FdrDomainError,
    MixingDistribution,
    RiskBreakdown,
    SparsityBall,
)
from expo_fdr.fdr import fdr_functional
from expo_fdr.mixtures import ExpScaleMixture, calibrated_eps

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-14
QUAD_LIMIT = 200
# Beyond this many units past the lower limit the exponential tail is below 1e-19.
TAIL_CUT = 45.0

LOG_SQUARED_OVER_MU_MAX = 4.0 / math.e**2
"""max over μ ≥ 1 of log²(μ)/μ, attained at μ = e²."""

KNEE_INTEGRAL_CONSTANT = 2.0
"""Constant C in |I(a, d)/d − 1| ≤ C·(a/d)^{1/(d−1)}, valid for d ≥ 3."""

NULL_VARIANCE = float(np.euler_gamma**2 + math.pi**2 / 6.0)
"""v(0, 1) = E[log² X] for X ~ Exp(1)."""


def _check_t_mu(t: float, mu: float) -> None:
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    if mu < 1:
        raise FdrDomainError(f"mu must be at least 1, got {mu}")


def _quad(func: Callable[[float], float], lo: float, hi: float) -> float:
    value, _ = integrate.quad(
        func, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT
    )
    return float(value)


def bias_proxy(t: float, mu: float) -> float:
    """b(t, μ) = log²(μ)·(1 − e^{−t/μ}): loss from signal censored below the threshold."""
    _check_t_mu(t, mu)
    if mu == 1.0:
        return 0.0
    return math.log(mu) ** 2 * -math.expm1(-t / mu)


def _standard_variance(s: float) -> float:
    """∫_s^∞ log²(x)·e^{−x} dx."""
    if s >= 1.0:
        shift = math.exp(-s)
        if shift == 0.0:
            return 0.0
        body = _quad(lambda y: math.log(s + y) ** 2 * math.exp(-y), 0.0, TAIL_CUT)
        return shift * body
    # x = e^{−u} on (s, 1) removes the log² singularity at the origin.
    u_max = TAIL_CUT + 15.0 if s == 0.0 else min(-math.log(s), TAIL_CUT + 15.0)
    head = _quad(lambda u: u * u * math.exp(-u - math.exp(-u)), 0.0, u_max)
    tail = math.exp(-1.0) * _quad(lambda y: math.log1p(y) ** 2 * math.exp(-y), 0.0, TAIL_CUT)
    return head + tail


def variance_proxy(t: float, mu: float) -> float:
    """
    v(t, μ) = ∫_{t/μ}^∞ log²(x)·e^{−x} dx: loss from observations kept by the threshold.

    Evaluated through the scale identity v(t, μ) = v(t/μ, 1).
    """
    _check_t_mu(t, mu)
    return _standard_variance(t / mu)


def variance_increment(t: float, mu: float) -> float:
    """v(t, μ) − v(t, 1) = ∫_{t/μ}^{t} log²(x)·e^{−x} dx, integrated directly."""
    _check_t_mu(t, mu)
    if mu == 1.0 or t == 0.0:
        return 0.0
    lo = t / mu
    if lo >= 1.0:
        return _quad(lambda x: math.log(x) ** 2 * math.exp(-x), lo, t)
    # Same substitution as the head of v, restricted to (lo, min(t, 1)).
    head = _quad(
        lambda u: u * u * math.exp(-u - math.exp(-u)), -math.log(min(t, 1.0)), -math.log(lo)
    )
    if t <= 1.0:
        return head
    return head + _quad(lambda x: math.log(x) ** 2 * math.exp(-x), 1.0, t)


def variance_approx(t: float) -> float:
    """Leading-order variance proxy log²(t)·e^{−t} for large t."""
    if t <= 0:
        raise FdrDomainError(f"t must be positive, got {t}")
    return math.log(t) ** 2 * math.exp(-t)


def threshold_bayes_risk(t: float, F: MixingDistribution) -> RiskBreakdown:
    """Bayes risk ρ_T(t, F) of hard thresholding at t under the prior F, split into proxies."""
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    bias = sum(w * bias_proxy(t, mu) for mu, w in zip(F.support, F.weights, strict=True))
    variance = sum(w * variance_proxy(t, mu) for mu, w in zip(F.support, F.weights, strict=True))
    return RiskBreakdown.from_parts(float(bias), float(variance))


def _check_two_point(eps: float, mu: float) -> None:
    if not 0.0 < eps < 1.0:
        raise FdrDomainError(f"eps must lie in (0, 1), got {eps}")
    if mu <= 1.0:
        raise FdrDomainError(f"mu must exceed 1, got {mu}")


def bayes_rule_log(x: float, eps: float, mu: float) -> float:
    """
    Posterior mean of log μ under F_{ε,μ} given X = x.

    The posterior weight of μ is 1/(1 + exp(−x(1 − 1/μ) + log((1 − ε)μ/ε))).
    """
    if x < 0:
        raise FdrDomainError(f"x must be non-negative, got {x}")
    _check_two_point(eps, mu)
    log_odds = x * (1.0 - 1.0 / mu) - math.log((1.0 - eps) * mu / eps)
    return float(special.expit(log_odds)) * math.log(mu)


def _knee_integral(a: float, d: float) -> float:
    """∫_0^1 (a + y^{1−1/d})^{−1} dy, split where y^{1−1/d} = a."""
    exponent = 1.0 - 1.0 / d

    def integrand(y: float) -> float:
        return 1.0 / (a + y**exponent)

    knee = a ** (1.0 / exponent) if a < 1.0 else 1.0
    if 0.0 < knee < 1.0:
        return _quad(integrand, 0.0, knee) + _quad(integrand, knee, 1.0)
    return _quad(integrand, 0.0, 1.0)


def two_point_bayes_risk(eps: float, mu: float) -> float:
    """
    Bayes risk of the two-point prior F_{ε,μ} under squared log loss.

    Evaluated as (ε·log²μ/μ)·∫_0^1 (ε/((1−ε)μ) + y^{1−1/μ})^{−1} dy.
    """
    if not 0.0 <= eps < 1.0:
        raise FdrDomainError(f"eps must lie in [0, 1), got {eps}")
    if mu < 1.0:
        raise FdrDomainError(f"mu must be at least 1, got {mu}")
    if eps == 0.0 or mu == 1.0:
        return 0.0
    a = eps / ((1.0 - eps) * mu)
    return eps * math.log(mu) ** 2 / mu * _knee_integral(a, mu)


def two_point_bayes_risk_direct(eps: float, mu: float) -> float:
    """
    Same risk as `two_point_bayes_risk`, integrated over the observation scale:
    (ε·log²μ/μ)·∫_0^∞ e^{−x/μ}/(1 + (ε/((1−ε)μ))·e^{x(1−1/μ)}) dx.
    """
    if not 0.0 <= eps < 1.0:
        raise FdrDomainError(f"eps must lie in [0, 1), got {eps}")
    if mu < 1.0:
        raise FdrDomainError(f"mu must be at least 1, got {mu}")
    if eps == 0.0 or mu == 1.0:
        return 0.0
    slope = 1.0 - 1.0 / mu
    log_a = math.log(eps / ((1.0 - eps) * mu))

    def integrand(x: float) -> float:
        return math.exp(-x / mu) * float(special.expit(-(x * slope + log_a)))

    crossover = -log_a / slope
    if crossover > 0.0:
        body = _quad(integrand, 0.0, crossover) + _quad(
            integrand, crossover, crossover + TAIL_CUT + 15.0
        )
    else:
        body = _quad(integrand, 0.0, TAIL_CUT + 15.0)
    return eps * math.log(mu) ** 2 / mu * body


def lemma21_integral(a: float, d: float) -> float:
    """∫_0^1 ((a/d) + y^{1−1/d})^{−1} dy, which behaves like d·(1 + O((a/d)^{1/(d−1)}))."""
    if a <= 0:
        raise FdrDomainError(f"a must be positive, got {a}")
    if d <= 1:
        raise FdrDomainError(f"d must exceed 1, got {d}")
    return _knee_integral(a / d, d)


def knee_integral_rate(a: float, d: float) -> float:
    if a <= 0 or d <= 1:
        raise FdrDomainError(f"need a > 0 and d > 1, got a = {a}, d = {d}")
    return (a / d) ** (1.0 / (d - 1.0))


def ideal_fdr_risk(F: MixingDistribution, cfg: FdrConfig) -> RiskBreakdown:
    """Risk of thresholding at the population functional T_q(G), G = E#F."""
    threshold = fdr_functional(ExpScaleMixture(F), cfg)
    return threshold_bayes_risk(threshold, F)


def bias_tail_bound(tau: float, cfg: FdrConfig, c: float = LOG_SQUARED_OVER_MU_MAX) -> float:
    """
    Bound on ∫ log²μ·(e^{−τ/μ} − e^{−T/μ}) dF for τ < T = T_q(G):
    (1/q)·c·τ·e^{−τ}/(1 − e^{−τ}).
    """
    if tau <= 0:
        raise FdrDomainError(f"tau must be positive, got {tau}")
    return c / cfg.q * tau * math.exp(-tau) / -math.expm1(-tau)


def _log_terms(ball: SparsityBall) -> tuple[float, float]:
    if ball.eta >= math.exp(-math.e):
        raise FdrDomainError(f"eta must be below e^(-e) ≈ 0.06599, got {ball.eta}")
    log_inv = -math.log(ball.eta)
    return log_inv, math.log(log_inv)


def minimax_threshold(ball: SparsityBall) -> float:
    """t0 = p·log(1/η) + p·loglog(1/η) + √loglog(1/η)."""
    log_inv, loglog = _log_terms(ball)
    return ball.p * log_inv + ball.p * loglog + math.sqrt(loglog)


def asymptotic_minimax_risk(ball: SparsityBall) -> float:
    """η^p·loglog(1/η)^{2−p}."""
    _, loglog = _log_terms(ball)
    return ball.budget * loglog ** (2.0 - ball.p)


def least_favorable_mus(ball: SparsityBall) -> tuple[float, float]:
    """Means near which the bias and variance proxies of the worst ideal risk peak."""
    log_inv, loglog = _log_terms(ball)
    return log_inv / loglog, log_inv * loglog


def bayes_least_favorable(ball: SparsityBall) -> tuple[float, float]:
    """
    Near least-favorable two-point prior for the Bayes risk.

    Returns:
        (ε*, μ*) with μ* = log(1/η)/loglog(1/η) and ε*·log^p(μ*) = η^p.
    """
    mu_star, _ = least_favorable_mus(ball)
    return calibrated_eps(ball, mu_star), mu_star


def log_mse_loss(estimate: np.ndarray, truth: np.ndarray) -> float:
    """(1/n)·Σ(log μ̂_i − log μ_i)²."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape or est.size == 0:
        raise FdrDomainError(
            f"estimate and truth must be non-empty and of equal length, got {est.shape} and "
            f"{tru.shape}"
        )
    if np.any(est <= 0) or np.any(tru < 1):
        raise FdrDomainError("estimates must be positive and true means at least 1")
    return float(np.mean((np.log(est) - np.log(tru)) ** 2))
