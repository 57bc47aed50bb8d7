"""
Mixtures module.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy import optimize, special

from expo_fdr.base import MU_CAP, FdrDomainError, MixingDistribution, SampleBatch, SparsityBall
from expo_fdr.seeding import make_rng

logger = logging.getLogger(__name__)

KS_GRID_SIZE = 512
KS_STARTS = 5
KS_XATOL = 1e-10


class ExpScaleMixture:
    """
    Scale mixture of exponentials G = E#F.

    An observation is drawn as μ ~ F and then X | μ ~ Exp(μ), so that the survival function is
    Ḡ(t) = Σ_j w_j·exp(−t/μ_j).
    """

    def __init__(self, mixing: MixingDistribution) -> None:
        self.mixing = mixing
        self._inv_support = 1.0 / mixing.support
        # Exponent slope of Ḡ(t)/Ē(t) for each component.
        self._ratio_slopes = (mixing.support - 1.0) / mixing.support

    def survival(self, t: float) -> float:
        return float(np.exp(-t * self._inv_support) @ self.mixing.weights)

    def survival_array(self, t: np.ndarray) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        return np.exp(-np.multiply.outer(t_arr, self._inv_support)) @ self.mixing.weights

    def cdf(self, t: float) -> float:
        return -float(np.expm1(-t * self._inv_support) @ self.mixing.weights)

    def density(self, x: float) -> float:
        return float((self._inv_support * np.exp(-x * self._inv_support)) @ self.mixing.weights)

    def log_survival_ratio(self, t: float) -> float:
        """log(Ḡ(t)/Ē(t)), evaluated without forming either survival function."""
        return float(special.logsumexp(t * self._ratio_slopes, b=self.mixing.weights))

    def sample(self, n: int, seed: int) -> SampleBatch:
        if n < 1:
            raise FdrDomainError(f"sample size must be at least 1, got {n}")
        rng = make_rng(seed)
        idx = rng.choice(self.mixing.support.size, size=n, p=self.mixing.weights)
        mu = self.mixing.support[idx]
        x = rng.exponential(mu)
        return SampleBatch(x=x, mu=mu, seed=seed)

    def __repr__(self) -> str:
        return f"ExpScaleMixture({self.mixing!r})"


def make_two_point(eps: float, mu: float) -> MixingDistribution:
    """
    Two-point mixing distribution (1 − eps)·δ_1 + eps·δ_mu.

    Parameters:
        eps: Weight of the non-null point, in [0, 1].
        mu: Non-null mean, at least 1.

    Returns:
        The mixing distribution, collapsed to a point mass when eps ∈ {0, 1} or mu = 1.
    """
    if not 0.0 <= eps <= 1.0:
        raise FdrDomainError(f"eps must lie in [0, 1], got {eps}")
    if not 1.0 <= mu <= MU_CAP:
        raise FdrDomainError(f"mu must lie in [1, {MU_CAP:g}], got {mu}")
    return MixingDistribution.from_points([1.0, mu], [1.0 - eps, eps])


def calibrated_eps(ball: SparsityBall, mu: float) -> float:
    """Weight ε placing F_{ε,μ} on the boundary of the ball: ε·log^p(μ) = η^p."""
    if not 1.0 < mu <= MU_CAP:
        raise FdrDomainError(f"mu must lie in (1, {MU_CAP:g}], got {mu}")
    eps = ball.budget / math.log(mu) ** ball.p
    if eps > 1.0:
        raise FdrDomainError(
            f"calibrated eps = {eps:.6g} exceeds 1: mu = {mu} is too close to 1 for "
            f"p = {ball.p}, eta = {ball.eta}"
        )
    return eps


def calibrated_two_point(ball: SparsityBall, mu: float) -> MixingDistribution:
    return make_two_point(calibrated_eps(ball, mu), mu)


def mixture_survival(G: ExpScaleMixture, t: float) -> float:
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    return G.survival(t)


def mixture_cdf(G: ExpScaleMixture, t: float) -> float:
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    return G.cdf(t)


def mixture_density(G: ExpScaleMixture, x: float) -> float:
    if x <= 0:
        raise FdrDomainError(f"x must be positive, got {x}")
    return G.density(x)


def sample_mixture(F: MixingDistribution, n: int, seed: int) -> SampleBatch:
    return ExpScaleMixture(F).sample(n, seed)


def frequentist_mixture(mu_vector: Sequence[float] | np.ndarray) -> MixingDistribution:
    """Empirical mixing distribution of a fixed mean vector, G_μ = (1/n)·Σ E(·/μ_i)."""
    mus = np.asarray(mu_vector, dtype=float).reshape(-1)
    if mus.size == 0:
        raise FdrDomainError("mean vector must not be empty")
    return MixingDistribution.from_points(mus, np.ones_like(mus))


def log_moment(F: MixingDistribution, p: float) -> float:
    if p <= 0:
        raise FdrDomainError(f"p must be positive, got {p}")
    return float(np.log(F.support) ** p @ F.weights)


def empirical_survival(batch: SampleBatch, t: float) -> float:
    """
    Empirical survival Ḡ_n(t) = #{X_i ≥ t}/n.

    A sample point sitting exactly at t counts as surviving.
    """
    if t < 0:
        raise FdrDomainError(f"t must be non-negative, got {t}")
    ordered = np.sort(batch.x)
    return float(batch.n - np.searchsorted(ordered, t, side="left")) / batch.n


def sup_distance(batch: SampleBatch, G: ExpScaleMixture) -> float:
    """sup_t |Ḡ_n(t) − Ḡ(t)|, exact over the step structure of Ḡ_n."""
    ordered = np.sort(batch.x)
    n = batch.n
    at_points = G.survival_array(ordered)
    # Ḡ_n jumps from (n − i)/n to (n − i − 1)/n just past the i-th order statistic.
    upper = (n - np.arange(n)) / n
    lower = (n - np.arange(1, n + 1)) / n
    return float(max(np.max(np.abs(upper - at_points)), np.max(np.abs(lower - at_points))))


def massart_tail(s: float) -> float:
    """Bound on P(√n·sup_t |G_n(t) − G(t)| ≥ s), valid for every n."""
    if s < 0:
        raise FdrDomainError(f"s must be non-negative, got {s}")
    return min(1.0, 2.0 * math.exp(-2.0 * s * s))


def stochastically_dominates(
    G1: ExpScaleMixture, G0: ExpScaleMixture, grid: np.ndarray | None = None
) -> bool:
    """True when Ḡ1 ≥ Ḡ0 everywhere on the grid (default: 10⁴ log-spaced points)."""
    if grid is None:
        scale = 50.0 * max(G1.mixing.mu_max, G0.mixing.mu_max)
        grid = np.geomspace(1e-6, scale, 10_000)
    return bool(np.all(G1.survival_array(grid) >= G0.survival_array(grid) - 1e-15))


def _two_point_peak(mu: float) -> float:
    """Argmax of e^{−t/μ} − e^{−t}."""
    return mu * math.log(mu) / (mu - 1.0)


def ks_distance_to_exp(F: MixingDistribution) -> float:
    """
    Kolmogorov distance sup_t (Ḡ(t) − Ē(t)) between G = E#F and the standard exponential.

    Mixtures supported on {1, μ} use the closed-form peak location; any other mixture is
    maximized numerically from several starts.
    """
    if F.is_null:
        return 0.0
    G = ExpScaleMixture(F)
    non_null = F.support > 1.0
    if np.count_nonzero(non_null) == 1:
        mu = float(F.support[non_null][0])
        eps = float(F.weights[non_null][0])
        t_bar = _two_point_peak(mu)
        return eps * (math.exp(-t_bar / mu) - math.exp(-t_bar))

    def gap(t: float) -> float:
        return G.survival(t) + math.expm1(-t)

    grid = np.concatenate(([0.0], np.geomspace(1e-6, 50.0 * F.mu_max, KS_GRID_SIZE)))
    values = G.survival_array(grid) + np.expm1(-grid)
    interior = np.flatnonzero((values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])) + 1
    starts = interior[np.argsort(values[interior])[::-1][:KS_STARTS]].tolist()
    dominant = int(np.argmax(np.where(non_null, F.weights, -1.0)))
    seed_t = _two_point_peak(float(F.support[dominant]))
    starts.append(int(np.clip(np.searchsorted(grid, seed_t), 1, grid.size - 2)))

    best = float(values.max())
    for idx in set(starts):
        res = optimize.minimize_scalar(
            lambda t: -gap(t),
            bounds=(grid[idx - 1], grid[idx + 1]),
            method="bounded",
            options={"xatol": KS_XATOL},
        )
        best = max(best, -float(res.fun))
    logger.debug("ks distance %.6g from %d starts", best, len(set(starts)))
    return best
