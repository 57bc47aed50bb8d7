"""
Command-line interface.
"""

import logging
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any

import click
import numpy as np

from expo_fdr.base import (
    FdrConfig,
    FdrDomainError,
    InputFormatError,
    NumericalError,
    RunManifest,
    SparsityBall,
)
from expo_fdr.default_problems import BiasProblem, SurvivalRatioProblem, VarianceProblem
from expo_fdr.envelope import asymptotics, robust_envelope, worst_ideal_risk_scan
from expo_fdr.fdr import fdr_functional, step_up_threshold
from expo_fdr.mc import convergence_experiment, risk_curve
from expo_fdr.mixtures import ExpScaleMixture, make_two_point
from expo_fdr.risk import minimax_threshold, variance_proxy
from expo_fdr.seeding import DEFAULT_SEED, GENERATOR_NAME
from expo_fdr.serialize import (
    asymptotics_to_dict,
    dumps,
    envelope_to_dict,
    mixing_from_json,
    read_batch_csv,
    threshold_result_to_dict,
    write_convergence_csv,
    write_curve_csv,
    write_manifest,
    write_scan_csv,
)

EXIT_DOMAIN = 3
EXIT_NUMERICAL = 4

OPEN_UNIT = click.FloatRange(0.0, 1.0, min_open=True, max_open=True)
POSITIVE = click.FloatRange(0.0, min_open=True)
SEED = click.IntRange(0, 2**64 - 1)


def _version() -> str:
    try:
        return metadata.version("expo-fdr")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _mixture_text(value: str) -> str:
    """`--mixture` is inline JSON when it opens with a brace, a file path otherwise."""
    if value.lstrip().startswith("{"):
        return value
    try:
        return Path(value).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.BadParameter(
            f"not inline JSON and not a readable file: {exc}", param_hint="--mixture"
        ) from exc


class FdrGroup(click.Group):
    """Command group mapping library errors to exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except InputFormatError as exc:
            raise click.UsageError(str(exc), ctx) from exc
        except FdrDomainError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_DOMAIN)
        except NumericalError as exc:
            click.echo(f"Error: numerical failure: {exc}", err=True)
            ctx.exit(EXIT_NUMERICAL)


def _read_config(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(
                f"line {lineno} is not key=value: {raw!r}", param_hint="--config"
            )
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _load_config(ctx: click.Context, _param: click.Parameter, value: Path | None) -> None:
    if value is None:
        return
    values = _read_config(value)
    group = ctx.command
    assert isinstance(group, click.Group)
    ctx.default_map = {name: dict(values) for name in group.commands}


def _float_list(_ctx: click.Context, _param: click.Parameter, value: str) -> list[float]:
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from exc


def _int_list(_ctx: click.Context, _param: click.Parameter, value: str) -> list[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from exc


def _manifest(
    ctx: click.Context, seed: int | None, started: str, outputs: list[str]
) -> RunManifest:
    parameters = {k: str(v) if isinstance(v, Path) else v for k, v in ctx.params.items()}
    return RunManifest(
        command=ctx.command_path,
        parameters=parameters,
        seed=seed,
        generator=GENERATOR_NAME,
        started=started,
        finished=_now(),
        version=_version(),
        outputs=outputs,
    )


@click.group(cls=FdrGroup)
@click.version_option(_version(), prog_name="expo-fdr")
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    callback=_load_config,
    expose_value=False,
    is_eager=True,
    help="key=value file pre-seeding options of every subcommand.",
)
@click.option("-v", "--verbose", count=True, help="Repeat for more log output on stderr.")
def cli(verbose: int) -> None:
    """FDR thresholding for sparse exponential means."""
    level = max(logging.WARNING - 10 * verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


@cli.command()
@click.argument("input_path", metavar="INPUT", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--q", type=OPEN_UNIT, default=0.25, show_default=True)
def threshold(input_path: Path, q: float) -> None:
    """Step-up FDR threshold of the `x` column of a CSV file."""
    batch = read_batch_csv(input_path)
    click.echo(dumps(threshold_result_to_dict(step_up_threshold(batch, FdrConfig(q)))))


@cli.command()
@click.option("--eps", type=click.FloatRange(0.0, 1.0), default=None)
@click.option("--mu", type=click.FloatRange(1.0), default=None)
@click.option("--mixture", default=None, help="Mixing distribution as JSON text or a JSON file.")
@click.option("--q", type=OPEN_UNIT, default=0.5, show_default=True)
def functional(eps: float | None, mu: float | None, mixture: str | None, q: float) -> None:
    """Population FDR functional T_q(G) of a two-point or JSON mixture."""
    if mixture is not None:
        F = mixing_from_json(_mixture_text(mixture))
    elif eps is not None and mu is not None:
        F = make_two_point(eps, mu)
    else:
        raise click.UsageError("give either --eps and --mu, or --mixture")
    click.echo(_fmt(fdr_functional(ExpScaleMixture(F), FdrConfig(q))))


@cli.command("risk-curve")
@click.option("--p", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True), default=1.0)
@click.option("--eta", type=POSITIVE, default=1e-3, show_default=True)
@click.option("--q", "qs", default="0.05,0.15,0.25,0.5", callback=_float_list, show_default=True)
@click.option("--mu-min", type=POSITIVE, default=2.0, show_default=True)
@click.option("--mu-max", type=POSITIVE, default=30.0, show_default=True)
@click.option("--mu-step", type=POSITIVE, default=1.0, show_default=True)
@click.option("--n", type=click.IntRange(min=1), default=100_000, show_default=True)
@click.option("--reps", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--seed", type=SEED, default=DEFAULT_SEED, envvar="FDR_SEED", show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("results"))
@click.pass_context
def risk_curve_cmd(
    ctx: click.Context,
    p: float,
    eta: float,
    qs: list[float],
    mu_min: float,
    mu_max: float,
    mu_step: float,
    n: int,
    reps: int,
    seed: int,
    workers: int,
    out: Path,
) -> None:
    """Monte Carlo risk of FDR thresholding over calibrated two-point mixtures."""
    # pylint: disable=too-many-arguments,too-many-locals
    started = _now()
    if not qs or any(not 0.0 < q < 1.0 for q in qs):
        raise click.BadParameter(f"q values must lie in (0, 1), got {qs}", param_hint="--q")
    if mu_max < mu_min:
        raise click.BadParameter("--mu-max must not be below --mu-min")
    mu_grid = np.arange(mu_min, mu_max + mu_step / 2.0, mu_step).tolist()
    curves = risk_curve(SparsityBall(p, eta), qs, mu_grid, n, reps, seed, workers)
    for q, points in curves.items():
        path = write_curve_csv(points, n, seed, out / f"risk_curve_q{q:g}.csv")
        write_manifest(_manifest(ctx, seed, started, [str(path)]), path)
        click.echo(str(path))


@cli.command()
@click.argument("problem", type=click.Choice(["bias", "variance", "hstar"]))
@click.option("--p", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True), default=1.0)
@click.option("--eta", type=POSITIVE, default=1e-3, show_default=True)
@click.option("--t", type=click.FloatRange(0.0, min_open=True), default=None)
@click.option("--q", type=OPEN_UNIT, default=0.25, show_default=True)
def envelope(problem: str, p: float, eta: float, t: float | None, q: float) -> None:
    """Worst case of the bias, variance or h* envelope problem over the sparsity ball."""
    ball = SparsityBall(p, eta)
    t = minimax_threshold(ball) if t is None else t
    problems = {"bias": BiasProblem, "variance": VarianceProblem, "hstar": SurvivalRatioProblem}
    result = robust_envelope(problems[problem](ball, t))
    report: dict[str, Any] = {"problem": problem, "t": t, **envelope_to_dict(result)}
    if problem == "variance":
        report["worst_variance"] = result.value + variance_proxy(t, 1.0)
    if problem == "hstar":
        target = (1.0 - q) / q
        report["target"] = target
        report["crosses"] = result.value >= target
    click.echo(dumps(report))


@cli.command()
@click.option("--eps", type=click.FloatRange(0.0, 1.0), default=0.01, show_default=True)
@click.option("--mu", type=click.FloatRange(1.0), default=10.0, show_default=True)
@click.option("--q", type=OPEN_UNIT, default=0.5, show_default=True)
@click.option("--n-list", "n_list", default="1000,10000,100000", callback=_int_list)
@click.option("--reps", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--seed", type=SEED, default=DEFAULT_SEED, envvar="FDR_SEED", show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("results/convergence.csv"),
)
@click.pass_context
def convergence(
    ctx: click.Context,
    eps: float,
    mu: float,
    q: float,
    n_list: list[int],
    reps: int,
    seed: int,
    workers: int,
    out: Path,
) -> None:
    """Root-n convergence of the empirical threshold; prints the fitted slope."""
    # pylint: disable=too-many-arguments
    started = _now()
    if len(n_list) < 3:
        raise click.BadParameter(
            f"need at least 3 sample sizes, got {n_list}", param_hint="--n-list"
        )
    F = make_two_point(eps, mu)
    result = convergence_experiment(F, FdrConfig(q), n_list, reps, seed, workers)
    path = write_convergence_csv(result, out)
    write_manifest(_manifest(ctx, seed, started, [str(path)]), path)
    click.echo(_fmt(result.slope))


@cli.command()
@click.option("--p", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True), default=1.0)
@click.option("--eta", type=POSITIVE, default=1e-6, show_default=True)
@click.option("--q", type=OPEN_UNIT, default=0.25, show_default=True)
@click.option("--mu-min", type=click.FloatRange(1.0, min_open=True), default=1.5, show_default=True)
@click.option("--mu-max", type=POSITIVE, default=200.0, show_default=True)
@click.option("--num", type=click.IntRange(min=2), default=200, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def scan(
    ctx: click.Context,
    p: float,
    eta: float,
    q: float,
    mu_min: float,
    mu_max: float,
    num: int,
    out: Path | None,
) -> None:
    """Worst-case ideal risk over calibrated two-point mixtures on a log-spaced grid."""
    # pylint: disable=too-many-arguments
    started = _now()
    ball = SparsityBall(p, eta)
    result = worst_ideal_risk_scan(ball, FdrConfig(q), np.geomspace(mu_min, mu_max, num).tolist())
    if out is not None:
        path = write_scan_csv(result, out)
        write_manifest(_manifest(ctx, None, started, [str(path)]), path)
    report = {
        "max_total": result.max_total,
        "argmax_mu": result.argmax_mu,
        "argmax_bias": result.argmax_of("bias"),
        "argmax_variance": result.argmax_of("variance"),
        "argmax_null_variance": result.argmax_of("null_variance"),
    }
    click.echo(dumps(report))


@cli.command("asymptotics")
@click.option("--p", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True), default=1.0)
@click.option("--eta", type=POSITIVE, default=1e-3, show_default=True)
@click.option("--q", type=OPEN_UNIT, default=0.5, show_default=True)
def asymptotics_cmd(p: float, eta: float, q: float) -> None:
    """t0, T_q* (numeric and formula), the minimax rate and the least favorable means."""
    click.echo(dumps(asymptotics_to_dict(asymptotics(SparsityBall(p, eta), FdrConfig(q)))))
