"""
Default envelope problems module.
"""

import math
from collections.abc import Callable

import numpy as np
from scipy import optimize

from expo_fdr.base import MU_CAP, BaseEnvelopeProblem, Regime, SparsityBall
from expo_fdr.risk import variance_increment

MU_BAR_GRID = 400


def log_moment_regime(p: float) -> Regime:
    """Regime of ψ/log^p for the built-in problems, where ψ grows linearly in μ − 1 near 1."""
    return "ratio-finite" if p <= 1.0 else "ratio-infinite"


def _smaller_root(func: Callable[[float], float], mu_hi: float) -> float | None:
    """Smallest μ in (1, mu_hi) where `func` turns from negative to positive."""
    if mu_hi <= 1.0:
        return None
    # The right end is kept off mu_hi, where the built-in slope equations are singular.
    grid = 1.0 + np.geomspace(1e-12, (mu_hi - 1.0) * (1.0 - 1e-6), MU_BAR_GRID)
    values = np.array([func(float(m)) for m in grid])
    positive = np.flatnonzero(values > 0)
    if positive.size == 0 or positive[0] == 0:
        return None
    i = int(positive[0])
    return float(optimize.brentq(func, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-14))


class LogMomentProblem(BaseEnvelopeProblem):
    """
    Envelope problem under the sparsity constraint ∫ log^p(μ) dF ≤ η^p.

    Parameters:
        ball: Sparsity ball supplying p and the budget η^p.
        t: Threshold at which ψ is evaluated.
        regime: Declared regime. Defaults to the regime implied by p.
    """

    def __init__(self, ball: SparsityBall, t: float, regime: Regime | None = None) -> None:
        super().__init__(ball.budget, regime or log_moment_regime(ball.p))
        self.ball = ball
        self.t = t

    def phi(self, mu: float) -> float:
        return math.log(mu) ** self.ball.p

    def phi_values(self, mus: np.ndarray) -> np.ndarray:
        return np.log(mus) ** self.ball.p

    def dphi(self, mu: float) -> float:
        return self.ball.p * math.log(mu) ** (self.ball.p - 1.0) / mu

    def phi_inverse(self, z: float) -> float:
        return math.exp(z ** (1.0 / self.ball.p)) if z > 0 else 1.0

    def mu_upper(self) -> float:
        return min(1e4 * max(self.t, 1.0 / self.ball.eta), MU_CAP)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(p={self.ball.p}, eta={self.ball.eta}, t={self.t})"


class BiasProblem(LogMomentProblem):
    """ψ(μ) = log²(μ)·(1 − e^{−t/μ}); ψ/φ vanishes at μ = 1 for every p < 2."""

    def __init__(self, ball: SparsityBall, t: float) -> None:
        super().__init__(ball, t, "ratio-finite")

    def psi(self, mu: float) -> float:
        return math.log(mu) ** 2 * -math.expm1(-self.t / mu)

    def psi_values(self, mus: np.ndarray) -> np.ndarray:
        return np.log(mus) ** 2 * -np.expm1(-self.t / mus)

    def dpsi(self, mu: float) -> float:
        log_mu = math.log(mu)
        tail = math.exp(-self.t / mu)
        return 2.0 * log_mu / mu * (1.0 - tail) - log_mu**2 * tail * self.t / mu**2


class VarianceProblem(LogMomentProblem):
    """ψ(μ) = v(t, μ) − v(t, 1), the variance proxy above its null level."""

    def psi(self, mu: float) -> float:
        return variance_increment(self.t, mu)

    def dpsi(self, mu: float) -> float:
        s = self.t / mu
        return math.log(s) ** 2 * math.exp(-s) * self.t / mu**2

    def mu_bar(self) -> float | None:
        if self.ball.p <= 1.0 or self.t <= 1.0:
            return None
        t, p = self.t, self.ball.p

        def slope_change(mu: float) -> float:
            return t / mu - 1.0 - 2.0 / math.log(t / mu) - (p - 1.0) / math.log(mu)

        return _smaller_root(slope_change, t)


class SurvivalRatioProblem(LogMomentProblem):
    """ψ(μ) = e^{(1−1/μ)t} − 1, the excess of Ē_μ(t)/Ē(t) over 1."""

    def psi(self, mu: float) -> float:
        return math.expm1(self.t * (mu - 1.0) / mu)

    def psi_values(self, mus: np.ndarray) -> np.ndarray:
        return np.expm1(self.t * (mus - 1.0) / mus)

    def dpsi(self, mu: float) -> float:
        return math.exp(self.t * (mu - 1.0) / mu) * self.t / mu**2

    def mu_bar(self) -> float | None:
        if self.ball.p <= 1.0:
            return None
        t, p = self.t, self.ball.p

        def slope_change(mu: float) -> float:
            return t / mu - 1.0 - (p - 1.0) / math.log(mu)

        return _smaller_root(slope_change, max(t, 1.0 + 1e-6))


class CallableProblem(BaseEnvelopeProblem):
    """
    Envelope problem from user-supplied oracles.

    Parameters:
        psi: Objective integrand with psi(1) = 0.
        phi: Strictly increasing constraint integrand with phi(1) = 0.
        z: Budget.
        regime: Declared regime.
        dpsi: Optional derivative of psi.
        dphi: Optional derivative of phi.
        mu_bar: Optional end of the concave stretch (ratio-infinite regime).
        mu_upper: Upper end of the μ search range.
    """

    def __init__(
        self,
        psi: Callable[[float], float],
        phi: Callable[[float], float],
        z: float,
        regime: Regime,
        dpsi: Callable[[float], float] | None = None,
        dphi: Callable[[float], float] | None = None,
        mu_bar: float | None = None,
        mu_upper: float = 1e6,
    ) -> None:
        # pylint: disable=too-many-arguments
        super().__init__(z, regime)
        self._psi = psi
        self._phi = phi
        self._dpsi = dpsi
        self._dphi = dphi
        self._mu_bar = mu_bar
        self._mu_upper = mu_upper

    def psi(self, mu: float) -> float:
        return float(self._psi(mu))

    def phi(self, mu: float) -> float:
        return float(self._phi(mu))

    def dpsi(self, mu: float) -> float:
        return float(self._dpsi(mu)) if self._dpsi else super().dpsi(mu)

    def dphi(self, mu: float) -> float:
        return float(self._dphi(mu)) if self._dphi else super().dphi(mu)

    def mu_bar(self) -> float | None:
        return self._mu_bar

    def mu_upper(self) -> float:
        return self._mu_upper
