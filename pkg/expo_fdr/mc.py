"""
Monte Carlo module.
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from expo_fdr.base import (
    ConvergenceResult,
    ConvergenceRow,
    CurvePoint,
    DegenerateMixtureError,
    FdrConfig,
    FdrDomainError,
    MixingDistribution,
    NumericalError,
    SampleBatch,
    SparsityBall,
    ThresholdResult,
    TrialReport,
)
from expo_fdr.fdr import capped_threshold, fdr_functional, threshold_estimate
from expo_fdr.mixtures import ExpScaleMixture, calibrated_two_point
from expo_fdr.risk import log_mse_loss
from expo_fdr.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

_T = TypeVar("_T")
_R = TypeVar("_R")


def _map(func: Callable[[_T], _R], items: Iterable[_T], workers: int) -> list[_R]:
    """Apply `func` to every item, results in input order whatever the worker count."""
    if workers < 1:
        raise FdrDomainError(f"workers must be at least 1, got {workers}")
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _false_discovery_proportion(batch: SampleBatch, result: ThresholdResult) -> float:
    if result.k_fdr == 0:
        return 0.0
    false = int(np.count_nonzero(batch.mu[result.discoveries] == 1.0))
    return false / result.k_fdr


def _report(batch: SampleBatch, result: ThresholdResult, seed: int) -> TrialReport:
    return TrialReport(
        loss=log_mse_loss(result.estimate, batch.mu),
        threshold=result.threshold,
        k_fdr=result.k_fdr,
        fdp=_false_discovery_proportion(batch, result),
        capped=result.capped,
        seed=seed,
    )


def run_trial(F: MixingDistribution, n: int, cfg: FdrConfig, seed: int) -> TrialReport:
    """
    One Bayesian trial: draw n observations from E#F and threshold at the capped empirical
    FDR threshold.

    Parameters:
        F: Mixing distribution of the means.
        n: Number of observations.
        cfg: FDR control parameter.
        seed: 64-bit seed; the trial is a pure function of its inputs.

    Returns:
        TrialReport with the log-MSE loss and the false discovery proportion.
    """
    batch = ExpScaleMixture(F).sample(n, seed)
    return _report(batch, capped_threshold(batch, cfg), seed)


def oracle_trial(F: MixingDistribution, n: int, threshold: float, seed: int) -> TrialReport:
    """Trial thresholded at a fixed, data-independent threshold such as T_q(G)."""
    if threshold < 0:
        raise FdrDomainError(f"threshold must be non-negative, got {threshold}")
    batch = ExpScaleMixture(F).sample(n, seed)
    discoveries = np.flatnonzero(batch.x >= threshold)
    result = ThresholdResult(
        k_fdr=int(discoveries.size),
        threshold=threshold,
        discoveries=discoveries,
        estimate=threshold_estimate(batch.x, threshold),
    )
    return _report(batch, result, seed)


def frequentist_trial(
    mu_vector: Sequence[float] | np.ndarray, cfg: FdrConfig, seed: int
) -> TrialReport:
    """Trial under the frequentist model X_i ~ Exp(μ_i) with a fixed mean vector."""
    mus = np.asarray(mu_vector, dtype=float).reshape(-1)
    if mus.size == 0:
        raise FdrDomainError("mean vector must not be empty")
    if np.any(mus < 1.0):
        raise FdrDomainError("means must be at least 1")
    rng = make_rng(seed)
    batch = SampleBatch(x=rng.exponential(mus), mu=mus, seed=seed)
    return _report(batch, capped_threshold(batch, cfg), seed)


def _summarize(q: float, mu: float, eps: float, reports: list[TrialReport]) -> CurvePoint:
    losses = np.array([r.loss for r in reports])
    reps = len(reports)
    se = float(np.std(losses, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return CurvePoint(
        q=q,
        mu=mu,
        eps=eps,
        mean_loss=float(losses.mean()),
        se_loss=se,
        mean_fdp=float(np.mean([r.fdp for r in reports])),
        reps=reps,
    )


def risk_curve(
    ball: SparsityBall,
    qs: Sequence[float],
    mu_grid: Sequence[float],
    n: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> dict[float, list[CurvePoint]]:
    """
    Empirical risk of FDR thresholding over calibrated two-point mixtures.

    For each (q, μ) the weight ε is calibrated so that ε·log^p(μ) = η^p, and `reps`
    independent trials of size n are averaged. Trial (cell, rep) draws from the seed
    derive_seed(seed, cell, rep) with cell = q_index·len(mu_grid) + μ_index, so the curve
    does not depend on `workers`. Cells whose ε cannot be calibrated are NaN.

    Returns:
        Mapping from q to the curve points in μ-grid order.
    """
    # pylint: disable=too-many-arguments,too-many-locals
    if reps < 1:
        raise FdrDomainError(f"reps must be at least 1, got {reps}")
    if n < 1:
        raise FdrDomainError(f"n must be at least 1, got {n}")
    cfgs = [FdrConfig(q) for q in qs]
    mixtures: list[MixingDistribution | None] = []
    for mu in mu_grid:
        try:
            mixtures.append(calibrated_two_point(ball, float(mu)))
        except FdrDomainError as exc:
            logger.warning("mu = %.6g recorded as NaN: %s", mu, exc)
            mixtures.append(None)

    tasks = [
        (qi, mi, rep)
        for qi in range(len(cfgs))
        for mi, F in enumerate(mixtures)
        if F is not None
        for rep in range(reps)
    ]

    def work(task: tuple[int, int, int]) -> TrialReport:
        qi, mi, rep = task
        F = mixtures[mi]
        assert F is not None
        return run_trial(F, n, cfgs[qi], derive_seed(seed, qi * len(mixtures) + mi, rep))

    reports = iter(_map(work, tasks, workers))
    curves: dict[float, list[CurvePoint]] = {}
    for cfg in cfgs:
        points = []
        for mu, F in zip(mu_grid, mixtures, strict=True):
            if F is None:
                nan = math.nan
                points.append(CurvePoint(cfg.q, float(mu), nan, nan, nan, nan, 0))
                continue
            cell = [next(reports) for _ in range(reps)]
            points.append(_summarize(cfg.q, float(mu), float(F.weights[-1]), cell))
        logger.info("q = %g: %d grid points done", cfg.q, len(points))
        curves[cfg.q] = points
    return curves


def convergence_experiment(
    F: MixingDistribution,
    cfg: FdrConfig,
    n_list: Sequence[int],
    reps: int,
    seed: int,
    workers: int = 1,
) -> ConvergenceResult:
    """
    Root-n convergence of the capped empirical threshold to T_q(G).

    For each n the median over reps of |T_q(G_n) − T_q(G)| is recorded; the slope of
    log-median against log n is the fitted convergence exponent.
    """
    # pylint: disable=too-many-arguments
    if F.is_null:
        raise DegenerateMixtureError("convergence is undefined for the null mixture")
    sizes = [int(n) for n in n_list]
    if len(sizes) < 3:
        raise FdrDomainError(f"n_list needs at least 3 sizes, got {len(sizes)}")
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise FdrDomainError(f"n_list must be positive and strictly increasing, got {sizes}")
    if reps < 1:
        raise FdrDomainError(f"reps must be at least 1, got {reps}")

    G = ExpScaleMixture(F)
    target = fdr_functional(G, cfg)

    def deviation(task: tuple[int, int]) -> float:
        ni, rep = task
        batch = G.sample(sizes[ni], derive_seed(seed, ni, rep))
        threshold = capped_threshold(batch, cfg).threshold
        assert threshold is not None
        return abs(threshold - target)

    tasks = [(ni, rep) for ni in range(len(sizes)) for rep in range(reps)]
    devs = np.asarray(_map(deviation, tasks, workers)).reshape(len(sizes), reps)
    medians = np.median(devs, axis=1)
    if np.any(medians <= 0):
        raise NumericalError(f"zero median deviation at n = {sizes[int(np.argmin(medians))]}")
    for n, med in zip(sizes, medians, strict=True):
        logger.info("n = %d: median |T_n - T| = %.6g", n, med)
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
    rows = tuple(
        ConvergenceRow(n=n, median_abs_dev=float(med), reps=reps)
        for n, med in zip(sizes, medians, strict=True)
    )
    return ConvergenceResult(slope=slope, rows=rows, functional_value=target, seed=seed)
