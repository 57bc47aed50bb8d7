"""
FDR thresholding module.
"""

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import optimize

from expo_fdr.base import (
    DegenerateMixtureError,
    FdrConfig,
    FdrDomainError,
    NumericalError,
    SampleBatch,
    ThresholdResult,
)
from expo_fdr.mixtures import ExpScaleMixture, ks_distance_to_exp

logger = logging.getLogger(__name__)

BISECT_XTOL = 1e-13
BRACKET_EXPANSIONS = 60


def step_boundaries(n: int, cfg: FdrConfig) -> np.ndarray:
    """Step-up boundaries t_k = −log(q·k/n) for k = 1..n (decreasing in k)."""
    k = np.arange(1, n + 1, dtype=float)
    return -np.log(cfg.q * k / n)


def threshold_estimate(x: np.ndarray, threshold: float | None) -> np.ndarray:
    """Hard-threshold rule: keep X_i when X_i ≥ threshold, else estimate the null mean 1."""
    x = np.asarray(x, dtype=float)
    if threshold is None:
        return np.ones_like(x)
    return np.where(x >= threshold, x, 1.0)


def _thresholded(
    x: np.ndarray, threshold: float | None, capped: bool = False
) -> ThresholdResult:
    if threshold is None:
        discoveries = np.empty(0, dtype=np.intp)
    else:
        discoveries = np.flatnonzero(x >= threshold)
    return ThresholdResult(
        k_fdr=int(discoveries.size),
        threshold=threshold,
        discoveries=discoveries,
        estimate=threshold_estimate(x, threshold),
        capped=capped,
    )


def step_up_threshold(batch: SampleBatch, cfg: FdrConfig) -> ThresholdResult:
    """
    Step-up FDR rule on exponential observations.

    Observations are sorted in decreasing order (ties broken by original index) and compared
    with the boundaries t_k = −log(q·k/n). The largest k with X_(k) ≥ t_k gives the
    threshold t_k and the top k observations are discoveries. When no k qualifies nothing is
    discovered and the threshold is infinite (None).

    Parameters:
        batch: Observations.
        cfg: FDR control parameter.

    Returns:
        ThresholdResult with the discovery set and the thresholded estimate.
    """
    x = batch.x
    order = np.argsort(-x, kind="stable")
    bounds = step_boundaries(batch.n, cfg)
    hits = np.flatnonzero(x[order] >= bounds)
    if hits.size == 0:
        return _thresholded(x, None)
    k_fdr = int(hits[-1]) + 1
    threshold = float(bounds[k_fdr - 1])
    discoveries = np.sort(order[:k_fdr])
    return ThresholdResult(
        k_fdr=k_fdr,
        threshold=threshold,
        discoveries=discoveries,
        estimate=threshold_estimate(x, threshold),
    )


def _crossing_gap(G: ExpScaleMixture, log_inv_q: float) -> Callable[[float], float]:
    return lambda t: G.log_survival_ratio(t) - log_inv_q


def fdr_functional(G: ExpScaleMixture, cfg: FdrConfig) -> float:
    """
    Population FDR functional T_q(G): the unique t with Ḡ(t) = Ē(t)/q.

    The crossing is located by bisection of log(Ḡ/Ē) − log(1/q), which is increasing in t.
    The bracket grows by doubling from log(1/q), so its width tracks T_q rather than the upper
    bound U from `functional_bounds`, which only caps the search. A single Newton step on
    Ḡ(t) − e^{−t}/q polishes the root.

    Raises:
        DegenerateMixtureError: If G is the standard exponential.
        NumericalError: If the crossing cannot be bracketed or the bisection does not converge.
    """
    if G.mixing.is_null:
        raise DegenerateMixtureError("no finite FDR crossing: the mixture equals Exp(1)")
    log_inv_q = cfg.log_inv_q
    gap = _crossing_gap(G, log_inv_q)
    distance = ks_distance_to_exp(G.mixing)
    cap = ((1.0 - cfg.q) / cfg.q) / distance + 1.0 if distance > 0 else math.inf
    lower, upper = 0.0, min(max(log_inv_q, 1.0), cap)
    for _ in range(BRACKET_EXPANSIONS):
        if gap(upper) > 0:
            break
        if upper >= cap:
            raise NumericalError(f"FDR crossing not found below the bound t = {cap:g}")
        lower, upper = upper, min(2.0 * upper, cap)
    else:
        raise NumericalError(f"FDR crossing not bracketed below t = {upper:g}")
    logger.debug("bisecting the FDR crossing on [%.6g, %.6g]", lower, upper)
    try:
        root = optimize.bisect(gap, lower, upper, xtol=BISECT_XTOL, maxiter=400)
    except RuntimeError as err:
        raise NumericalError(f"FDR crossing bisection failed on [{lower:g}, {upper:g}]") from err

    # Newton polish on the linear-scale residual.
    residual = G.survival(root) - math.exp(-root) / cfg.q
    slope = -G.density(root) + math.exp(-root) / cfg.q
    if slope > 0:
        polished = root - residual / slope
        new_residual = G.survival(polished) - math.exp(-polished) / cfg.q
        if abs(new_residual) < abs(residual):
            root = polished
    return float(root)


def fdr_functional_empirical(batch: SampleBatch, cfg: FdrConfig) -> float | None:
    """
    Empirical functional T_q(G_n) = inf{t : Ḡ_n(t) ≥ Ē(t)/q}.

    On the stretch (X_(k+1), X_(k)] where Ḡ_n equals k/n, the smallest feasible point is
    max(X_(k+1), t_k), provided t_k ≤ X_(k). The infimum over all stretches is exact.

    Returns:
        The threshold, or None when no t is feasible.
    """
    desc = np.sort(batch.x)[::-1]
    bounds = step_boundaries(batch.n, cfg)
    left = np.append(desc[1:], 0.0)
    feasible = bounds <= desc
    if not np.any(feasible):
        return None
    candidates = np.maximum(left[feasible], bounds[feasible])
    return float(candidates.min())


def capped_threshold(batch: SampleBatch, cfg: FdrConfig) -> ThresholdResult:
    """
    Empirical functional with the cap log(n/q) substituted when no crossing exists.

    The resulting threshold never exceeds log(n/q), and thresholding at it selects the same
    observations as `step_up_threshold`.
    """
    threshold = fdr_functional_empirical(batch, cfg)
    if threshold is None:
        return _thresholded(batch.x, math.log(batch.n / cfg.q), capped=True)
    return _thresholded(batch.x, threshold)


def functional_bounds(G: ExpScaleMixture, cfg: FdrConfig) -> tuple[float, float]:
    """
    Lower and upper bounds on T_q(G) in terms of ‖G − E‖.

    Returns:
        (−log((q/(1−q))·‖G−E‖), ((1−q)/q)/‖G−E‖)
    """
    if G.mixing.is_null:
        raise DegenerateMixtureError("bounds undefined: the mixture equals Exp(1)")
    distance = ks_distance_to_exp(G.mixing)
    odds = cfg.q / (1.0 - cfg.q)
    return -math.log(odds * distance), 1.0 / (odds * distance)


def _extremal_mean(t0: float, cfg: FdrConfig) -> float:
    if t0 <= cfg.log_inv_q:
        raise FdrDomainError(f"t0 must exceed log(1/q) = {cfg.log_inv_q:.6g}, got {t0}")
    return 1.0 / (1.0 + math.log(cfg.q) / t0)


def extremal_cdf_survival(t0: float, cfg: FdrConfig, t: float) -> float:
    """
    Survival of the steepest exponential crossing Ē/q at t0, e^{−t/μ*} with
    μ* = 1/(1 + log(q)/t0).
    """
    mu_star = _extremal_mean(t0, cfg)
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    return math.exp(-t / mu_star)


def modulus_bound(t0: float, cfg: FdrConfig, eps: float) -> float:
    """Leading-order modulus of continuity of T_q at t0: (q/log(1/q))·t0·e^{t0}·eps."""
    if t0 <= cfg.log_inv_q:
        raise FdrDomainError(f"t0 must exceed log(1/q) = {cfg.log_inv_q:.6g}, got {t0}")
    if eps < 0:
        raise FdrDomainError(f"eps must be non-negative, got {eps}")
    return cfg.q / cfg.log_inv_q * t0 * math.exp(t0) * eps
