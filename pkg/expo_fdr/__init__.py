"""
expo-fdr package.
"""

from expo_fdr.base import (
    BaseEnvelopeProblem,
    DegenerateMixtureError,
    EnvelopeResult,
    FdrConfig,
    FdrDomainError,
    InputFormatError,
    MixingDistribution,
    NumericalError,
    OutOfRangeError,
    SampleBatch,
    SparsityBall,
    ThresholdResult,
)
from expo_fdr.envelope import envelope_value, h_star, t_q_star, worst_ideal_risk_scan
from expo_fdr.fdr import capped_threshold, fdr_functional, step_up_threshold
from expo_fdr.mc import convergence_experiment, risk_curve, run_trial
from expo_fdr.mixtures import ExpScaleMixture, make_two_point

__all__ = [
    "BaseEnvelopeProblem",
    "DegenerateMixtureError",
    "EnvelopeResult",
    "ExpScaleMixture",
    "FdrConfig",
    "FdrDomainError",
    "InputFormatError",
    "MixingDistribution",
    "NumericalError",
    "OutOfRangeError",
    "SampleBatch",
    "SparsityBall",
    "ThresholdResult",
    "capped_threshold",
    "convergence_experiment",
    "envelope_value",
    "fdr_functional",
    "h_star",
    "make_two_point",
    "risk_curve",
    "run_trial",
    "step_up_threshold",
    "t_q_star",
    "worst_ideal_risk_scan",
]
