"""
Test reading inputs and writing result files.
"""

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from expo_fdr.base import (
    ConvergenceResult,
    ConvergenceRow,
    CurvePoint,
    FdrDomainError,
    InputFormatError,
    RiskBreakdown,
    RunManifest,
    SampleBatch,
)
from expo_fdr.mixtures import make_two_point
from expo_fdr.serialize import (
    CONVERGENCE_COLUMNS,
    CURVE_COLUMNS,
    dumps,
    manifest_path,
    mixing_from_json,
    mixing_to_json,
    read_batch_csv,
    risk_to_dict,
    round_floats,
    write_batch_csv,
    write_convergence_csv,
    write_curve_csv,
    write_manifest,
)


def test_mixing_json() -> None:
    F = make_two_point(0.1, 10.0)
    parsed = mixing_from_json(mixing_to_json(F))
    np.testing.assert_array_equal(parsed.support, F.support)
    np.testing.assert_array_equal(parsed.weights, F.weights)


@pytest.mark.parametrize(
    "text",
    ["not json", "[1, 2]", '{"support": [1.0]}', '{"support": ["a"], "weights": [1.0]}'],
)
def test_mixing_from_json_rejects_malformed(text: str) -> None:
    with pytest.raises(InputFormatError):
        mixing_from_json(text)


def test_mixing_from_json_rejects_invalid_points() -> None:
    with pytest.raises(FdrDomainError):
        mixing_from_json('{"support": [0.5], "weights": [1.0]}')


def test_round_floats() -> None:
    data = {"a": 1.0 / 3.0, "b": [math.inf, 2], "c": (0.1 + 0.2,)}
    assert round_floats(data) == {"a": 0.333333333333, "b": ["inf", 2], "c": [0.3]}
    assert dumps({"b": 1, "a": 2}) == '{"a": 2, "b": 1}'


def test_risk_to_dict() -> None:
    risk = RiskBreakdown.from_parts(bias=0.5, variance=0.25)
    assert risk_to_dict(risk) == {"bias": 0.5, "variance": 0.25, "total": 0.75}
    assert dumps(risk_to_dict(risk)) == '{"bias": 0.5, "total": 0.75, "variance": 0.25}'


def test_batch_csv(tmp_path: Path) -> None:
    batch = SampleBatch(x=np.array([0.5, 2.0, 7.0]), mu=np.array([1.0, 1.0, 10.0]))
    path = write_batch_csv(batch, tmp_path / "batch.csv")
    read = read_batch_csv(path)
    np.testing.assert_allclose(read.x, batch.x)
    np.testing.assert_allclose(read.mu, batch.mu)


def test_batch_csv_without_means(tmp_path: Path) -> None:
    path = tmp_path / "x.csv"
    path.write_text("x\n1.5\n0.25\n", encoding="utf-8")
    np.testing.assert_allclose(read_batch_csv(path).x, [1.5, 0.25])


@pytest.mark.parametrize(
    "content",
    ["", "x\n", "y\n1.0\n", "x\n1.0\nabc\n", "x,mu\n3.0,\n1.0,1\n", "x,mu\n,2.0\n1.0,1\n"],
    ids=["empty", "header", "column", "text", "blank-mu", "blank-x"],
)
def test_batch_csv_rejects_malformed(tmp_path: Path, content: str) -> None:
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(InputFormatError):
        read_batch_csv(path)


def test_batch_csv_missing_file(tmp_path: Path) -> None:
    with pytest.raises(InputFormatError):
        read_batch_csv(tmp_path / "missing.csv")


def test_curve_csv(tmp_path: Path) -> None:
    points = [
        CurvePoint(0.25, 2.0, 1e-3, 1.5e-3, 1e-4, 0.2, 16),
        CurvePoint(0.25, 3.0, math.nan, math.nan, math.nan, math.nan, 0),
    ]
    path = write_curve_csv(points, n=1000, seed=7, path=tmp_path / "out" / "curve.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == CURVE_COLUMNS
    assert frame["seed"].tolist() == [7, 7]
    assert math.isnan(frame["mean_loss"].iloc[1])
    assert path.read_text(encoding="utf-8").splitlines()[2].split(",")[3] == "nan"
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(CURVE_COLUMNS)


def test_convergence_csv(tmp_path: Path) -> None:
    result = ConvergenceResult(
        slope=-0.5,
        rows=(ConvergenceRow(1000, 0.4, 10), ConvergenceRow(10_000, 0.13, 10)),
        functional_value=5.1,
        seed=3,
    )
    frame = pd.read_csv(write_convergence_csv(result, tmp_path / "conv.csv"))
    assert list(frame.columns) == CONVERGENCE_COLUMNS
    assert frame["slope_overall"].tolist() == [-0.5, -0.5]


def test_manifest(tmp_path: Path) -> None:
    output = tmp_path / "curve.csv"
    assert manifest_path(output) == tmp_path / "curve.csv.manifest.json"
    manifest = RunManifest(
        command="expo-fdr risk-curve",
        parameters={"n": 10, "eta": 1e-3},
        seed=1,
        generator="philox",
        started="2024-01-01T00:00:00+00:00",
        finished="2024-01-01T00:00:01+00:00",
        version="0.1.0",
        outputs=[str(output)],
    )
    data = json.loads(write_manifest(manifest, output).read_text(encoding="utf-8"))
    assert data["seed"] == 1
    assert data["parameters"] == {"eta": 0.001, "n": 10}
    assert data["outputs"] == [str(output)]
