"""
Envelope module.
"""

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from scipy import optimize

from expo_fdr.base import (
    AsymptoticPoint,
    BaseEnvelopeProblem,
    EnvelopeResult,
    FdrConfig,
    FdrDomainError,
    MixingDistribution,
    NumericalError,
    OutOfRangeError,
    RiskScan,
    ScanPoint,
    SparsityBall,
)
from expo_fdr.default_problems import BiasProblem, SurvivalRatioProblem, VarianceProblem
from expo_fdr.fdr import fdr_functional
from expo_fdr.mixtures import ExpScaleMixture, calibrated_two_point
from expo_fdr.risk import (
    _log_terms,
    asymptotic_minimax_risk,
    least_favorable_mus,
    minimax_threshold,
    threshold_bayes_risk,
    variance_proxy,
)

# pylint: disable=too-many-locals

logger = logging.getLogger(__name__)

GRID_SIZE = 2048
RATIO_FLOOR = 1e-8
TANGENT_FLOOR = 1e-15
REFINE_STARTS = 5
REFINE_XATOL = 1e-10
PLATEAU_RTOL = 1e-12
BUDGET_RTOL = 1e-12
SPOT_CHECK_SIZE = 64
BRUTEFORCE_FLOOR = 1e-12
TQ_BRACKET_DOUBLINGS = 5


def _offset_grid(base: float, floor: float, top: float, size: int) -> np.ndarray:
    return base + np.geomspace(floor, top - base, size)


def _maximize(
    func: Callable[[float], float],
    grid: np.ndarray,
    values: np.ndarray,
    base: float,
    starts: int = REFINE_STARTS,
) -> tuple[float, float]:
    """
    Maximize `func` over a grid of points above `base`.

    The best local maxima of the sampled values seed bounded refinements in log(μ − base).
    """
    vals = np.where(np.isfinite(values), values, -np.inf)
    padded = np.concatenate(([-np.inf], vals, [-np.inf]))
    peaks = np.flatnonzero((vals >= padded[:-2]) & (vals >= padded[2:]))
    peaks = peaks[np.argsort(vals[peaks])[::-1][:starts]]
    best_idx = int(np.argmax(vals))
    best_mu, best_val = float(grid[best_idx]), float(vals[best_idx])
    logs = np.log(grid - base)
    for i in peaks:
        lo, hi = logs[max(i - 1, 0)], logs[min(i + 1, grid.size - 1)]
        if not hi > lo:
            continue
        res = optimize.minimize_scalar(
            lambda u: -func(base + math.exp(u)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": REFINE_XATOL},
        )
        if np.isfinite(res.fun) and -res.fun > best_val:
            best_mu, best_val = base + math.exp(float(res.x)), -float(res.fun)
    return best_mu, best_val


def _check_problem(prob: BaseEnvelopeProblem) -> bool:
    """
    Validate the problem oracles; returns False when ψ vanishes on the whole spot-check grid.
    """
    grid = _offset_grid(1.0, 1e-6, prob.mu_upper(), SPOT_CHECK_SIZE)
    psi = prob.psi_values(grid)
    phi = prob.phi_values(grid)
    if np.any(psi < -1e-12):
        raise FdrDomainError(f"psi must be non-negative, found {psi.min():.3g} for {prob!r}")
    if np.any(np.diff(phi) <= 0):
        raise FdrDomainError(f"phi must be strictly increasing for {prob!r}")
    if not np.any(psi > 0):
        return False

    near_one = 1.0 + 10.0 ** -np.arange(4, 9, dtype=float)
    ratios = prob.psi_values(near_one) / prob.phi_values(near_one)
    r4, r8 = float(ratios[0]), float(ratios[-1])
    if prob.regime == "ratio-finite" and r8 > 10.0 * r4:
        raise FdrDomainError(f"{prob!r} is declared ratio-finite but psi/phi diverges near 1")
    if prob.regime == "ratio-infinite" and not r8 > r4:
        raise FdrDomainError(
            f"{prob!r} is declared ratio-infinite but psi/phi stays bounded near 1"
        )
    return True


def _null_result(prob: BaseEnvelopeProblem) -> EnvelopeResult:
    return EnvelopeResult(
        value=0.0,
        mu_star=1.0,
        mu_lower=None,
        slope=0.0,
        attaining=MixingDistribution.point_mass(1.0),
        regime=prob.regime,
    )


def _ratio(prob: BaseEnvelopeProblem) -> Callable[[float], float]:
    return lambda mu: prob.psi(mu) / prob.phi(mu)


def _rightmost_argmax(
    prob: BaseEnvelopeProblem, grid: np.ndarray, ratios: np.ndarray, mu_star: float, best: float
) -> float:
    """Right end of the set where ψ/φ is within PLATEAU_RTOL of its maximum."""
    level = best * (1.0 - PLATEAU_RTOL)
    above = np.flatnonzero(ratios >= level)
    if above.size == 0 or grid[above[-1]] <= mu_star:
        return mu_star
    last = int(above[-1])
    if last == grid.size - 1:
        return float(grid[last])
    ratio = _ratio(prob)
    return float(
        optimize.brentq(lambda m: ratio(m) - level, grid[last], grid[last + 1], xtol=1e-14)
    )


def _ratio_finite(prob: BaseEnvelopeProblem) -> EnvelopeResult:
    grid = _offset_grid(1.0, RATIO_FLOOR, prob.mu_upper(), GRID_SIZE)
    ratios = prob.psi_values(grid) / prob.phi_values(grid)
    mu_star, best = _maximize(_ratio(prob), grid, ratios, 1.0)
    mu_star = _rightmost_argmax(prob, grid, ratios, mu_star, best)
    phi_star = prob.phi(mu_star)
    slope = prob.psi(mu_star) / phi_star
    logger.debug("ratio-finite: mu* = %.10g, slope = %.10g", mu_star, slope)
    if prob.z > phi_star * (1.0 + BUDGET_RTOL):
        raise OutOfRangeError(
            f"budget {prob.z:.6g} exceeds phi(mu*) = {phi_star:.6g} at mu* = {mu_star:.6g}"
        )
    eps = min(prob.z / phi_star, 1.0)
    return EnvelopeResult(
        value=slope * prob.z,
        mu_star=mu_star,
        mu_lower=None,
        slope=slope,
        attaining=MixingDistribution.from_points([1.0, mu_star], [1.0 - eps, eps]),
        regime="ratio-finite",
    )


def _locate_mu_bar(prob: BaseEnvelopeProblem, mu_hi: float) -> float:
    """First local minimum of ψ'/φ' above 1, or mu_hi when ψ'/φ' keeps decreasing."""
    grid = _offset_grid(1.0, 1e-12, mu_hi, GRID_SIZE)
    slopes = np.array([prob.dpsi(float(m)) / prob.dphi(float(m)) for m in grid])
    rising = np.flatnonzero(np.diff(slopes) > 0)
    if rising.size == 0:
        return mu_hi
    return float(grid[rising[0]])


class _ChordSearch:
    """Steepest chord from a point of the (φ, ψ) curve to points beyond μ̄."""

    def __init__(self, prob: BaseEnvelopeProblem, mu_bar: float, mu_hi: float) -> None:
        self.prob = prob
        self.mu_bar = mu_bar
        self.grid = _offset_grid(mu_bar, 1e-6 * (mu_bar - 1.0), mu_hi, GRID_SIZE)
        self.psi = prob.psi_values(self.grid)
        self.phi = prob.phi_values(self.grid)

    def steepest(self, mu: float, starts: int = 1) -> tuple[float, float]:
        psi0, phi0 = self.prob.psi(mu), self.prob.phi(mu)
        slopes = (self.psi - psi0) / (self.phi - phi0)

        def chord(m: float) -> float:
            return (self.prob.psi(m) - psi0) / (self.prob.phi(m) - phi0)

        return _maximize(chord, self.grid, slopes, self.mu_bar, starts)


def _ratio_infinite(prob: BaseEnvelopeProblem) -> EnvelopeResult:
    mu_hi = prob.mu_upper()
    mu_bar = prob.mu_bar() or _locate_mu_bar(prob, mu_hi)
    if mu_bar >= mu_hi:
        mu_point = prob.phi_inverse(prob.z)
        logger.debug("ratio-infinite: concave throughout, single mass at %.10g", mu_point)
        return EnvelopeResult(
            value=prob.psi(mu_point),
            mu_star=mu_point,
            mu_lower=mu_point,
            slope=prob.dpsi(mu_point) / prob.dphi(mu_point),
            attaining=MixingDistribution.point_mass(mu_point),
            regime="ratio-infinite",
            mu_bar=mu_bar,
        )
    chords = _ChordSearch(prob, mu_bar, mu_hi)

    def tangency_gap(log_offset: float) -> float:
        mu = 1.0 + math.exp(log_offset)
        return prob.dpsi(mu) / prob.dphi(mu) - chords.steepest(mu)[1]

    lo, hi = math.log(TANGENT_FLOOR), math.log(mu_bar - 1.0)
    if tangency_gap(hi) >= 0:
        raise NumericalError(f"no tangency below mu_bar = {mu_bar:.6g} for {prob!r}")
    if tangency_gap(lo) <= 0:
        mu_lower = 1.0
    else:
        mu_lower = 1.0 + math.exp(optimize.bisect(tangency_gap, lo, hi, xtol=1e-12))
    mu_star, slope = chords.steepest(mu_lower, REFINE_STARTS)
    phi_lower, phi_star = prob.phi(mu_lower), prob.phi(mu_star)
    logger.debug(
        "ratio-infinite: mu_bar = %.10g, mu_* = %.10g, mu* = %.10g, slope = %.10g",
        mu_bar,
        mu_lower,
        mu_star,
        slope,
    )
    z = prob.z
    if z > phi_star * (1.0 + BUDGET_RTOL):
        raise OutOfRangeError(
            f"budget {z:.6g} exceeds phi(mu*) = {phi_star:.6g} at mu* = {mu_star:.6g}"
        )
    if z <= phi_lower:
        mu_point = prob.phi_inverse(z)
        value = prob.psi(mu_point)
        attaining = MixingDistribution.point_mass(mu_point)
    else:
        eps = min((z - phi_lower) / (phi_star - phi_lower), 1.0)
        value = (1.0 - eps) * prob.psi(mu_lower) + eps * prob.psi(mu_star)
        attaining = MixingDistribution.from_points([mu_lower, mu_star], [1.0 - eps, eps])
    return EnvelopeResult(
        value=value,
        mu_star=mu_star,
        mu_lower=mu_lower,
        slope=slope,
        attaining=attaining,
        regime="ratio-infinite",
        mu_bar=mu_bar,
    )


def envelope_value(prob: BaseEnvelopeProblem) -> EnvelopeResult:
    """
    Maximize ∫ψ dF subject to ∫φ dF ≤ z.

    In the ratio-finite regime the maximizer mixes δ_1 with a point mass at μ* = argmax ψ/φ
    and the value is linear in z. In the ratio-infinite regime the value follows the curve
    ψ(φ^{−1}(z)) up to the tangency point μ_*, then the chord from μ_* to μ*.

    Parameters:
        prob: The envelope problem.

    Returns:
        EnvelopeResult with the value, the extremal points and an attaining mixture.

    Raises:
        OutOfRangeError: If z exceeds φ(μ*).
        NumericalError: If the tangency point cannot be bracketed.
    """
    if not _check_problem(prob) or prob.z == 0.0:
        return _null_result(prob)
    if prob.regime == "ratio-finite":
        return _ratio_finite(prob)
    return _ratio_infinite(prob)


def _bruteforce(prob: BaseEnvelopeProblem, grid_size: int) -> tuple[float, MixingDistribution]:
    if grid_size < 100:
        raise FdrDomainError(f"grid_size must be at least 100, got {grid_size}")
    if prob.z == 0.0:
        return 0.0, MixingDistribution.point_mass(1.0)
    mus = np.concatenate(
        ([1.0], _offset_grid(1.0, BRUTEFORCE_FLOOR, prob.mu_upper(), grid_size))
    )
    psi = prob.psi_values(mus)
    phi = prob.phi_values(mus)
    z = prob.z
    inside = np.flatnonzero(phi <= z)
    outside = np.flatnonzero(phi > z)

    single = int(inside[np.argmax(psi[inside])])
    best_val = float(psi[single])
    best_mix = MixingDistribution.point_mass(float(mus[single]))
    if outside.size:
        eps = (z - phi[inside][:, None]) / (phi[outside][None, :] - phi[inside][:, None])
        values = psi[inside][:, None] + eps * (psi[outside][None, :] - psi[inside][:, None])
        i, j = np.unravel_index(int(np.argmax(values)), values.shape)
        if values[i, j] > best_val:
            best_val = float(values[i, j])
            lo, hi, w = float(mus[inside[i]]), float(mus[outside[j]]), float(eps[i, j])
            best_mix = MixingDistribution.from_points([lo, hi], [1.0 - w, w])
    return best_val, best_mix


def envelope_bruteforce(prob: BaseEnvelopeProblem, grid_size: int) -> float:
    """
    Exhaustive search over two-point mixtures on a log-spaced μ grid.

    Each pair (μ_1, μ_2) straddling the budget is mixed so that ∫φ dF = z exactly; single
    point masses inside the budget are included. Grids of sizes 100, 199, 397, … are nested.
    """
    return _bruteforce(prob, grid_size)[0]


def robust_envelope(prob: BaseEnvelopeProblem, grid_size: int = GRID_SIZE) -> EnvelopeResult:
    """`envelope_value`, falling back to the grid oracle when z lies beyond φ(μ*)."""
    try:
        return envelope_value(prob)
    except OutOfRangeError as exc:
        logger.info("grid fallback for %r: %s", prob, exc)
    value, mix = _bruteforce(prob, grid_size)
    support = mix.support
    return EnvelopeResult(
        value=value,
        mu_star=float(support[-1]),
        mu_lower=float(support[0]) if support.size > 1 else None,
        slope=value / prob.z if prob.z > 0 else 0.0,
        attaining=mix,
        regime=prob.regime,
    )


def worst_bias(ball: SparsityBall, t: float) -> float:
    """Worst-case bias proxy sup ∫ b(t, μ) dF over the ball."""
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    if t == 0.0:
        return 0.0
    return robust_envelope(BiasProblem(ball, t)).value


def worst_variance(ball: SparsityBall, t: float) -> float:
    """Worst-case variance proxy sup ∫ v(t, μ) dF over the ball."""
    if t <= 0:
        raise FdrDomainError(f"t must be positive, got {t}")
    return robust_envelope(VarianceProblem(ball, t)).value + variance_proxy(t, 1.0)


def h_star(t: float, ball: SparsityBall) -> float:
    """h*(t) = sup Ḡ(t)/Ē(t) − 1 over mixtures in the ball."""
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    if t == 0.0:
        return 0.0
    return robust_envelope(SurvivalRatioProblem(ball, t)).value


def t_q_star(ball: SparsityBall, cfg: FdrConfig) -> tuple[float, float]:
    """
    Smallest FDR functional over the ball, T_q* = inf T_q(G).

    Returns:
        (numeric, formula): the crossing h*(t) = (1 − q)/q, and the asymptotic expression
        p·(log(1/η) + logloglog(1/η)) + log((1 − q)/q).
    """
    log_inv, loglog = _log_terms(ball)
    target = (1.0 - cfg.q) / cfg.q
    formula = ball.p * (log_inv + math.log(loglog)) + math.log(target)

    def gap(t: float) -> float:
        return h_star(t, ball) - target

    lo = cfg.log_inv_q
    hi = 3.0 * ball.p * log_inv + 20.0
    for _ in range(TQ_BRACKET_DOUBLINGS + 1):
        if gap(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NumericalError(f"h* does not reach {target:.6g} below t = {hi:.6g}")
    if gap(lo) >= 0:
        return lo, formula
    numeric = float(optimize.brentq(gap, lo, hi, xtol=1e-10))
    return numeric, formula


def asymptotics(ball: SparsityBall, cfg: FdrConfig) -> AsymptoticPoint:
    numeric, formula = t_q_star(ball, cfg)
    mu_b, mu_v = least_favorable_mus(ball)
    return AsymptoticPoint(
        t0=minimax_threshold(ball),
        tq_star=numeric,
        tq_star_formula=formula,
        rate=asymptotic_minimax_risk(ball),
        mu_b_star=mu_b,
        mu_v_star=mu_v,
    )


def ideal_scan_point(ball: SparsityBall, cfg: FdrConfig, mu: float) -> ScanPoint:
    """Ideal FDR risk of the calibrated two-point mixture at μ, with its decomposition."""
    F = calibrated_two_point(ball, mu)
    eps = float(F.weights[-1]) if F.support[-1] == mu else 0.0
    threshold = fdr_functional(ExpScaleMixture(F), cfg)
    risk = threshold_bayes_risk(threshold, F)
    return ScanPoint(
        mu=mu,
        eps=eps,
        threshold=threshold,
        bias=risk.bias,
        variance=risk.variance,
        total=risk.total,
        null_variance=(1.0 - eps) * variance_proxy(threshold, 1.0),
    )


def worst_ideal_risk_scan(
    ball: SparsityBall, cfg: FdrConfig, mu_grid: Sequence[float]
) -> RiskScan:
    """
    Ideal FDR risk over calibrated two-point mixtures on a grid of μ.

    Grid points where ε cannot be calibrated are recorded as NaN rows.

    Returns:
        RiskScan with the maximal total risk, its μ and the full curve.
    """
    points: list[ScanPoint] = []
    for mu in mu_grid:
        try:
            points.append(ideal_scan_point(ball, cfg, float(mu)))
        except FdrDomainError as exc:
            logger.warning("scan point mu = %.6g skipped: %s", mu, exc)
            nan = math.nan
            points.append(ScanPoint(float(mu), nan, nan, nan, nan, nan, nan))
    totals = np.array([pt.total for pt in points], dtype=float)
    if totals.size == 0 or np.all(np.isnan(totals)):
        raise FdrDomainError("no calibratable point on the mu grid")
    best = int(np.nanargmax(totals))
    return RiskScan(max_total=float(totals[best]), argmax_mu=points[best].mu, curve=tuple(points))


def refine_scan_max(ball: SparsityBall, cfg: FdrConfig, scan: RiskScan) -> tuple[float, float]:
    """Local maximization of the ideal risk between the grid neighbours of the scan argmax."""
    mus = [pt.mu for pt in scan.curve]
    idx = mus.index(scan.argmax_mu)
    lo = mus[max(idx - 1, 0)]
    hi = mus[min(idx + 1, len(mus) - 1)]
    if not hi > lo:
        return scan.argmax_mu, scan.max_total
    res = optimize.minimize_scalar(
        lambda u: -ideal_scan_point(ball, cfg, math.exp(u)).total,
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-6},
    )
    if -res.fun > scan.max_total:
        return math.exp(float(res.x)), -float(res.fun)
    return scan.argmax_mu, scan.max_total
