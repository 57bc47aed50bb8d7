"""
Serialization module.
"""

import json
import math
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

import pandas as pd

from expo_fdr.base import (
    AsymptoticPoint,
    ConvergenceResult,
    CurvePoint,
    EnvelopeResult,
    FdrDomainError,
    InputFormatError,
    MixingDistribution,
    RiskBreakdown,
    RiskScan,
    RunManifest,
    SampleBatch,
    ThresholdResult,
)

FLOAT_FORMAT = "%.12g"
CURVE_COLUMNS = ["q", "mu", "eps", "mean_loss", "se_loss", "mean_fdp", "reps", "n", "seed"]
CONVERGENCE_COLUMNS = ["n", "median_abs_dev", "reps", "seed", "slope_overall"]
SCAN_COLUMNS = ["mu", "eps", "threshold", "bias", "variance", "total"]


def round_floats(value: Any, digits: int = 12) -> Any:
    """Round every float in a JSON-like structure to `digits` significant digits."""
    if isinstance(value, float):
        return float(f"{value:.{digits}g}") if math.isfinite(value) else str(value)
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [round_floats(v, digits) for v in value]
    return value


def dumps(obj: Any) -> str:
    return json.dumps(round_floats(obj), sort_keys=True)


def mixing_to_json(F: MixingDistribution) -> str:
    return json.dumps(F.to_dict())


def mixing_from_json(text: str) -> MixingDistribution:
    """
    Parse a mixing distribution from `{"support": [...], "weights": [...]}`.

    Raises:
        InputFormatError: If the text is not such an object.
        FdrDomainError: If the points or weights are invalid.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"mixture is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not {"support", "weights"} <= data.keys():
        raise InputFormatError(f"mixture JSON needs 'support' and 'weights' keys, got {data!r}")
    try:
        return MixingDistribution.from_points(data["support"], data["weights"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FdrDomainError):
            raise
        raise InputFormatError(f"mixture support and weights must be numbers: {exc}") from exc


def threshold_result_to_dict(result: ThresholdResult) -> dict[str, Any]:
    return {
        "threshold": "inf" if result.threshold is None else result.threshold,
        "k_fdr": result.k_fdr,
        "discoveries": result.discoveries.tolist(),
        "capped": result.capped,
    }


def risk_to_dict(risk: RiskBreakdown) -> dict[str, float]:
    return asdict(risk)


def envelope_to_dict(result: EnvelopeResult) -> dict[str, Any]:
    return {
        "regime": result.regime,
        "value": result.value,
        "mu_star": result.mu_star,
        "mu_lower": result.mu_lower,
        "mu_bar": result.mu_bar,
        "slope": result.slope,
        "attaining": result.attaining.to_dict(),
    }


def asymptotics_to_dict(point: AsymptoticPoint) -> dict[str, float]:
    data = asdict(point)
    data["tq_star_gap"] = point.tq_star - point.tq_star_formula
    return data


def read_batch_csv(path: str | Path) -> SampleBatch:
    """
    Read observations from a CSV file with an `x` column; an optional `mu` column holds
    the true means.
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise InputFormatError(f"no such file: {path}") from exc
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise InputFormatError(f"cannot parse {path}: {exc}") from exc
    if "x" not in frame.columns:
        raise InputFormatError(f"{path} has no 'x' column, found {list(frame.columns)}")
    if frame.empty:
        raise InputFormatError(f"{path} holds no observations")
    columns = [name for name in ("x", "mu") if name in frame.columns]
    blank = frame[columns].isna().any()
    if blank.any():
        raise InputFormatError(f"{path} has blank cells in {list(blank[blank].index)}")
    try:
        x = pd.to_numeric(frame["x"]).to_numpy(dtype=float)
        if "mu" in frame.columns:
            mu = pd.to_numeric(frame["mu"]).to_numpy(dtype=float)
            return SampleBatch(x=x, mu=mu)
    except ValueError as exc:
        if isinstance(exc, FdrDomainError):
            raise
        raise InputFormatError(f"non-numeric values in {path}: {exc}") from exc
    return SampleBatch.from_observations(x)


def _write_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return out


def write_batch_csv(batch: SampleBatch, path: str | Path) -> Path:
    return _write_frame(pd.DataFrame({"x": batch.x, "mu": batch.mu}), path)


def write_curve_csv(points: Sequence[CurvePoint], n: int, seed: int, path: str | Path) -> Path:
    frame = pd.DataFrame([asdict(pt) for pt in points], columns=CURVE_COLUMNS[:-2])
    frame["n"] = n
    frame["seed"] = seed
    return _write_frame(frame[CURVE_COLUMNS], path)


def write_convergence_csv(result: ConvergenceResult, path: str | Path) -> Path:
    frame = pd.DataFrame([asdict(row) for row in result.rows])
    frame["seed"] = result.seed
    frame["slope_overall"] = result.slope
    return _write_frame(frame[CONVERGENCE_COLUMNS], path)


def write_scan_csv(scan: RiskScan, path: str | Path) -> Path:
    frame = pd.DataFrame([asdict(pt) for pt in scan.curve])
    return _write_frame(frame[SCAN_COLUMNS], path)


def manifest_path(output: str | Path) -> Path:
    out = Path(output)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(manifest: RunManifest, output: str | Path) -> Path:
    """Write the manifest paired with `output` next to it as `<output>.manifest.json`."""
    path = manifest_path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(round_floats(asdict(manifest)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
