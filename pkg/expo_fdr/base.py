"""
Base module.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from scipy import optimize

Regime = Literal["ratio-finite", "ratio-infinite"]
"""Envelope regime: ψ/φ bounded near μ = 1 (single-mass lemma) or unbounded (tangent lemma)."""

MU_CAP = 1e12
"""Largest mean accepted anywhere in the library."""

WEIGHT_TOL = 1e-12


class FdrDomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


class DegenerateMixtureError(FdrDomainError):
    """Raised when the mixture equals the standard exponential and no crossing exists."""


class OutOfRangeError(FdrDomainError):
    """Raised when an envelope budget exceeds the range on which the extremal lemmas apply."""


class NumericalError(RuntimeError):
    """Raised when a bracket cannot be established or an iteration fails to converge."""


class InputFormatError(ValueError):
    """Raised when an input file or serialized object is malformed."""


def _as_float_array(values: Any, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise FdrDomainError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """
    Discrete mixing distribution F over means μ ≥ 1.

    Use `from_points` to build one from unsorted or duplicated support points; the plain
    constructor expects an already canonical (sorted, unique, normalized) representation.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        support = _as_float_array(self.support, "support")
        weights = _as_float_array(self.weights, "weights")
        if support.size == 0 or support.size != weights.size:
            raise FdrDomainError(
                f"support and weights must be non-empty and of equal length, got "
                f"{support.size} and {weights.size}"
            )
        if np.any(support < 1.0) or np.any(support > MU_CAP):
            raise FdrDomainError(f"support points must lie in [1, {MU_CAP:g}], got {support}")
        if np.any(np.diff(support) <= 0):
            raise FdrDomainError(f"support must be strictly increasing, got {support}")
        if np.any(weights < 0):
            raise FdrDomainError(f"weights must be non-negative, got {weights}")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_TOL:
            raise FdrDomainError(f"weights must sum to 1, got {float(weights.sum())!r}")
        support.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, support: Any, weights: Any) -> "MixingDistribution":
        """
        Build a canonical mixing distribution.

        Duplicate support points are merged, zero-weight points dropped and the weights
        renormalized.

        Parameters:
            support: Mean values, each ≥ 1, in any order.
            weights: Non-negative weights, parallel to `support`.

        Returns:
            The canonical MixingDistribution.
        """
        mus = _as_float_array(support, "support")
        ws = _as_float_array(weights, "weights")
        if mus.size == 0 or mus.size != ws.size:
            raise FdrDomainError(
                f"support and weights must be non-empty and of equal length, got "
                f"{mus.size} and {ws.size}"
            )
        if np.any(ws < 0):
            raise FdrDomainError(f"weights must be non-negative, got {ws}")
        unique_mus, inverse = np.unique(mus, return_inverse=True)
        merged = np.bincount(inverse, weights=ws, minlength=unique_mus.size)
        keep = merged > 0
        total = float(merged[keep].sum())
        if total <= 0:
            raise FdrDomainError("weights must not all be zero")
        return cls(support=unique_mus[keep], weights=merged[keep] / total)

    @classmethod
    def point_mass(cls, mu: float) -> "MixingDistribution":
        return cls(support=np.array([mu], dtype=float), weights=np.array([1.0]))

    @property
    def is_null(self) -> bool:
        """True when F is the point mass at 1, i.e. the mixture is the standard exponential."""
        return self.support.size == 1 and self.support[0] == 1.0

    @property
    def mu_max(self) -> float:
        return float(self.support[-1])

    def to_dict(self) -> dict[str, list[float]]:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    def __repr__(self) -> str:
        support, weights = self.support.tolist(), self.weights.tolist()
        return f"MixingDistribution(support={support}, weights={weights})"


@dataclass(frozen=True)
class SparsityBall:
    """
    Moment constraint ∫ log^p(μ) dF ≤ η^p.

    Attributes:
        p: Exponent in (0, 2).
        eta: Radius, strictly positive.
    """

    p: float
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 2.0:
            raise FdrDomainError(f"p must lie in (0, 2), got {self.p}")
        if not (self.eta > 0.0 and math.isfinite(self.eta)):
            raise FdrDomainError(f"eta must be positive and finite, got {self.eta}")

    @property
    def budget(self) -> float:
        return self.eta**self.p


@dataclass(frozen=True, eq=False)
class SampleBatch:
    x: np.ndarray
    mu: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        x = _as_float_array(self.x, "x")
        mu = _as_float_array(self.mu, "mu")
        if x.size == 0:
            raise FdrDomainError("batch must contain at least one observation")
        if x.size != mu.size:
            raise FdrDomainError(f"x and mu must have equal length, got {x.size} and {mu.size}")
        if np.any(x < 0):
            raise FdrDomainError("observations must be non-negative")
        if np.any(mu < 1):
            raise FdrDomainError("means must be at least 1")
        x.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def from_observations(cls, x: Any, seed: int | None = None) -> "SampleBatch":
        """Batch of observations whose true means are unknown; means are recorded as 1."""
        arr = _as_float_array(x, "x")
        return cls(x=arr, mu=np.ones_like(arr), seed=seed)

    @property
    def n(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class FdrConfig:
    q: float

    def __post_init__(self) -> None:
        if not 0.0 < self.q < 1.0:
            raise FdrDomainError(f"q must lie in the open interval (0, 1), got {self.q}")

    @property
    def log_inv_q(self) -> float:
        return -math.log(self.q)


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    """
    Outcome of a thresholding rule.

    `threshold` is None when no finite threshold exists (nothing is discovered).
    """

    k_fdr: int
    threshold: float | None
    discoveries: np.ndarray
    estimate: np.ndarray
    capped: bool = False

    @property
    def is_infinite(self) -> bool:
        return self.threshold is None


@dataclass(frozen=True)
class RiskBreakdown:
    bias: float
    variance: float
    total: float

    @classmethod
    def from_parts(cls, bias: float, variance: float) -> "RiskBreakdown":
        return cls(bias=bias, variance=variance, total=bias + variance)


@dataclass(frozen=True)
class AsymptoticPoint:
    t0: float
    tq_star: float
    tq_star_formula: float
    rate: float
    mu_b_star: float
    mu_v_star: float


@dataclass(frozen=True)
class EnvelopeResult:
    """
    Solution of an envelope problem.

    Attributes:
        value: Ψ(z), the maximal ∫ψ dF under the budget.
        mu_star: Upper support point of the extremal mixture.
        mu_lower: Lower tangency point (ratio-infinite regime only).
        slope: Ψ* (ratio-finite) or Ψ** at the tangency point (ratio-infinite).
        attaining: Mixing distribution attaining `value`.
        regime: Which lemma produced the result.
        mu_bar: End of the concave stretch (ratio-infinite regime only).
    """

    value: float
    mu_star: float
    mu_lower: float | None
    slope: float
    attaining: MixingDistribution
    regime: Regime
    mu_bar: float | None = None


@dataclass(frozen=True)
class TrialReport:
    loss: float
    threshold: float | None
    k_fdr: int
    fdp: float
    capped: bool
    seed: int


@dataclass(frozen=True)
class CurvePoint:
    q: float
    mu: float
    eps: float
    mean_loss: float
    se_loss: float
    mean_fdp: float
    reps: int


@dataclass(frozen=True)
class ScanPoint:
    mu: float
    eps: float
    threshold: float
    bias: float
    variance: float
    total: float
    null_variance: float


@dataclass(frozen=True)
class RiskScan:
    max_total: float
    argmax_mu: float
    curve: tuple[ScanPoint, ...]

    def argmax_of(self, component: Literal["bias", "variance", "null_variance", "total"]) -> float:
        """μ at which the given component of the curve peaks (NaN points ignored)."""
        values = np.array([getattr(pt, component) for pt in self.curve], dtype=float)
        if values.size == 0 or np.all(np.isnan(values)):
            return math.nan
        return self.curve[int(np.nanargmax(values))].mu


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    median_abs_dev: float
    reps: int


@dataclass(frozen=True)
class ConvergenceResult:
    slope: float
    rows: tuple[ConvergenceRow, ...]
    functional_value: float
    seed: int


@dataclass(frozen=True)
class RunManifest:
    command: str
    parameters: dict[str, Any]
    seed: int | None
    generator: str
    started: str
    finished: str
    version: str
    outputs: list[str] = field(default_factory=list)


class BaseEnvelopeProblem(ABC):
    """
    Maximize ∫ψ dF subject to ∫φ dF ≤ z over mixing distributions on [1, ∞).

    Subclasses provide ψ and φ (both vanishing at μ = 1, φ strictly increasing) and declare
    the regime. Derivative oracles default to central differences.
    """

    def __init__(self, z: float, regime: Regime) -> None:
        if not (z >= 0.0 and math.isfinite(z)):
            raise FdrDomainError(f"budget z must be non-negative and finite, got {z}")
        if regime not in ("ratio-finite", "ratio-infinite"):
            raise FdrDomainError(f"unknown regime {regime!r}")
        self.z = z
        self.regime: Regime = regime

    @abstractmethod
    def psi(self, mu: float) -> float:
        """Objective integrand ψ(μ)."""

    @abstractmethod
    def phi(self, mu: float) -> float:
        """Constraint integrand φ(μ)."""

    def psi_values(self, mus: np.ndarray) -> np.ndarray:
        return np.array([self.psi(float(m)) for m in mus], dtype=float)

    def phi_values(self, mus: np.ndarray) -> np.ndarray:
        return np.array([self.phi(float(m)) for m in mus], dtype=float)

    def dpsi(self, mu: float) -> float:
        return _central_difference(self.psi, mu)

    def dphi(self, mu: float) -> float:
        return _central_difference(self.phi, mu)

    def mu_upper(self) -> float:
        """Upper end of the μ search range."""
        return 1e6

    def mu_bar(self) -> float | None:
        """End of the concave stretch in the ratio-infinite regime, if known analytically."""
        return None

    def phi_inverse(self, z: float) -> float:
        if z <= 0.0:
            return 1.0
        hi = self.mu_upper()
        for _ in range(60):
            if self.phi(hi) >= z:
                break
            hi = min(hi * 10.0, MU_CAP)
        else:
            raise NumericalError(f"phi never reaches {z} below mu = {hi:g}")
        return float(optimize.brentq(lambda m: self.phi(m) - z, 1.0, hi, xtol=1e-14, rtol=1e-15))


def _central_difference(func: Any, mu: float) -> float:
    step = 1e-6 * max(1.0, mu)
    lo = max(1.0, mu - step)
    hi = mu + step
    return float((func(hi) - func(lo)) / (hi - lo))
