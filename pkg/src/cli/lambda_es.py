"""Command line for Lambda-ES risk reports, ES curves, portfolio optimisation and verification."""

import argparse
import csv
import io
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from src.cli.inputs import (
    load_distribution_csv,
    load_lambda_json,
    load_scenarios_csv,
    parse_grid,
    parse_levels,
)
from src.config import settings
from src.errors import InfeasibleProblemError, InvalidInputError, LambdaESError, PreconditionError
from src.optimization.ru_opt import (
    BoxSet,
    ScenarioMatrix,
    SimplexSet,
    law_of_portfolio,
    min_objective_with_lambda_es_constraint,
    min_portfolio_lambda_es,
)
from src.risk.dist import Distribution
from src.risk.lambdas import BaseLambda
from src.risk.measures import CrossingCertificate, es, lambda_es, lambda_var, var_left, var_right
from src.utils import format_real, to_json_value, write_atomic
from src.verification.harness import PropertyHarness, default_checks, save_report

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_PROPERTY = 4

DEFAULT_LEVELS = "0.5,0.9,0.95,0.99"


class RiskReport(BaseModel):
    """Risk measures of one loss distribution; level-indexed maps are keyed by the level."""

    source: str
    var: dict[str, float]
    var_plus: dict[str, float]
    es_at_levels: dict[str, float]
    lambda_var: float
    lambda_var_plus: float
    lambda_es: float
    crossing_certificate: CrossingCertificate
    lambda_spec: dict


class CurvePoint(BaseModel):
    x: float
    es: float
    value: float  # min(ES_{Lambda(x)}, x)
    x_star: bool = False


class OptimizationReport(BaseModel):
    """Optimal portfolio, or the status of a problem without one."""

    status: str
    mode: str
    asset_names: list[str]
    theta: list[float] | None = None
    value: float | None = None
    x_star: float | None = None
    level: float | None = None
    lambda_es_at_theta: float | None = None
    golden_section_value: float | None = None
    lp_iterations: int = 0
    message: str | None = None


# Shared helpers


def _dump(model: BaseModel, path: Path) -> None:
    text = json.dumps(to_json_value(model.model_dump()), indent=2, ensure_ascii=False)
    write_atomic(path, text + "\n")
    console.print(f"[yellow]Report saved to: {path}[/]")


def _default_out(name: str) -> Path:
    return Path(settings.output_dir) / name


def _parse_reals(text: str, count: int, what: str) -> list[float]:
    """Parse a scalar or a comma list of ``count`` numbers."""
    try:
        values = [float(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise InvalidInputError(f"invalid {what}: {text!r}") from None
    if len(values) == 1:
        return values * count
    if len(values) != count:
        raise InvalidInputError(f"{what} needs 1 or {count} values, got {len(values)}")
    return values


def _load_loss_law(args: argparse.Namespace) -> tuple[Distribution, str]:
    """Loss law from ``--dist``, or the portfolio loss of ``--scenarios`` at ``--theta``."""
    if args.dist:
        return load_distribution_csv(Path(args.dist)), str(args.dist)
    if args.scenarios:
        scenarios = load_scenarios_csv(Path(args.scenarios))
        n = scenarios.num_assets
        theta = _parse_reals(args.theta, n, "--theta") if args.theta else [1.0 / n] * n
        return law_of_portfolio(scenarios, theta).law("loss"), str(args.scenarios)
    raise InvalidInputError("one of --dist or --scenarios is required")


def _feasible_set(args: argparse.Namespace, scenarios: ScenarioMatrix) -> SimplexSet | BoxSet:
    if args.feasible == "simplex":
        return SimplexSet()
    n = scenarios.num_assets
    return BoxSet(
        lo=_parse_reals(args.lo, n, "--lo"),
        hi=_parse_reals(args.hi, n, "--hi"),
        budget=args.budget,
    )


# Commands


def build_risk_report(dist: Distribution, lam: BaseLambda, levels: list[float], source: str = "") -> RiskReport:
    """Compute every reported measure of ``dist`` under ``lam``."""
    x_star, certificate = lambda_es(dist, lam)
    if not certificate.holds():
        logger.warning("Crossing certificate fails at %.17g", x_star)
    keys = [format_real(level) for level in levels]
    return RiskReport(
        source=source,
        var={k: var_left(dist, a) for k, a in zip(keys, levels)},
        var_plus={k: var_right(dist, a) for k, a in zip(keys, levels)},
        es_at_levels={k: es(dist, a) for k, a in zip(keys, levels)},
        lambda_var=lambda_var(dist, lam),
        lambda_var_plus=lambda_var(dist, lam, upper=True),
        lambda_es=x_star,
        crossing_certificate=certificate,
        lambda_spec=lam.model_dump(),
    )


def cmd_compute(args: argparse.Namespace) -> int:
    dist, source = _load_loss_law(args)
    lam = load_lambda_json(Path(args.lambda_path))
    report = build_risk_report(dist, lam, parse_levels(args.levels), source)

    table = Table(title="Risk Report", show_header=True, header_style="bold")
    table.add_column("Level", style="cyan")
    table.add_column("VaR", justify="right")
    table.add_column("VaR+", justify="right")
    table.add_column("ES", justify="right", style="magenta")
    for key in report.var:
        table.add_row(key, f"{report.var[key]:.6g}", f"{report.var_plus[key]:.6g}", f"{report.es_at_levels[key]:.6g}")
    console.print(table)
    console.print(
        f"[bold]Lambda-VaR:[/] {report.lambda_var:.10g}   "
        f"[bold]Lambda-VaR+:[/] {report.lambda_var_plus:.10g}   "
        f"[bold green]Lambda-ES:[/] {report.lambda_es:.10g}"
    )
    _dump(report, Path(args.out) if args.out else _default_out("risk_report.json"))
    return EXIT_OK


def es_curve(dist: Distribution, lam: BaseLambda, grid) -> list[CurvePoint]:
    """
    Points (x, ES_{Lambda(x)}, min(ES_{Lambda(x)}, x)) over the grid.

    The crossing x* is inserted into the grid and flagged, so the largest value
    of the last column is Lambda-ES up to grid resolution.
    """
    x_star, _ = lambda_es(dist, lam)
    xs = sorted({float(x) for x in grid} | {x_star})
    points = []
    for x in xs:
        level_es = es(dist, lam.eval(x))
        points.append(CurvePoint(x=x, es=level_es, value=min(level_es, x), x_star=x == x_star))
    return points


def cmd_curve(args: argparse.Namespace) -> int:
    dist, _ = _load_loss_law(args)
    lam = load_lambda_json(Path(args.lambda_path))
    if args.grid:
        grid = parse_grid(args.grid)
    else:
        grid = np.linspace(dist.ess_inf - 1.0, dist.ess_sup + 1.0, settings.curve_points)
    points = es_curve(dist, lam, grid)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["x", "es", "min_es_x", "x_star"])
    for point in points:
        writer.writerow([format_real(point.x), format_real(point.es), format_real(point.value), int(point.x_star)])
    out = Path(args.out) if args.out else _default_out("es_curve.csv")
    write_atomic(out, buffer.getvalue())

    star = next(point for point in points if point.x_star)
    console.print(f"[green]{len(points)} curve points, crossing at x* = {star.x:.10g}[/]")
    console.print(f"[yellow]Curve saved to: {out}[/]")
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    scenarios = load_scenarios_csv(Path(args.scenarios))
    lam = load_lambda_json(Path(args.lambda_path))
    feasible = _feasible_set(args, scenarios)
    mode = "constraint" if args.ell is not None else "lambda_es"
    out = Path(args.out) if args.out else _default_out("optimization.json")

    try:
        if mode == "constraint":
            solution = min_objective_with_lambda_es_constraint(scenarios, args.level, lam, args.ell, feasible)
        else:
            solution = min_portfolio_lambda_es(scenarios, lam, feasible)
    except InfeasibleProblemError as err:
        logger.error("Infeasible problem: %s", err)
        report = OptimizationReport(
            status="infeasible",
            mode=mode,
            asset_names=list(scenarios.asset_names),
            message=str(err),
        )
        _dump(report, out)
        return EXIT_INFEASIBLE

    achieved, _ = lambda_es(law_of_portfolio(scenarios, solution.theta).law("loss"), lam)
    if mode == "lambda_es" and abs(achieved - solution.value) > 1e-6 * max(1.0, abs(solution.value)):
        logger.warning("Lambda-ES at the optimum %.17g differs from the solver value %.17g", achieved, solution.value)
    report = OptimizationReport(
        status="optimal",
        mode=mode,
        asset_names=list(scenarios.asset_names),
        theta=list(solution.theta),
        value=solution.value,
        x_star=solution.x_star,
        level=solution.level,
        lambda_es_at_theta=achieved,
        golden_section_value=solution.golden_section_value,
        lp_iterations=solution.lp_iterations,
    )

    table = Table(title="Optimal Portfolio", show_header=True, header_style="bold")
    table.add_column("Asset", style="cyan")
    table.add_column("Weight", justify="right", style="magenta")
    for name, weight in zip(report.asset_names, report.theta):
        table.add_row(name, f"{weight:.6f}")
    console.print(table)
    console.print(f"[bold green]Objective value: {report.value:.10g}[/] (Lambda-ES at theta {achieved:.10g})")
    _dump(report, out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.list:
        for name in default_checks():
            console.print(name)
        return EXIT_OK
    harness = PropertyHarness()
    if args.only:
        names = [name.strip() for item in args.only for name in item.split(",") if name.strip()]
        harness = harness.select(names)
    report = harness.run(seed=args.seed, trials=args.trials)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    save_report(report, Path(args.out) if args.out else _default_out(f"verification_{timestamp}.json"))
    if not report.ok:
        console.print(f"[bold red]Failed checks: {', '.join(report.failed)}[/]")
        return EXIT_PROPERTY
    console.print("[bold green]Every check passed.[/]")
    return EXIT_OK


# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lambda-es", description="Lambda Expected Shortfall toolkit")
    parser.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_law_inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dist", help="CSV with header value,prob")
        p.add_argument("--scenarios", help="CSV with header prob,asset_1,...,asset_n")
        p.add_argument("--theta", help="Portfolio weights used with --scenarios (default equal weights)")
        p.add_argument("--lambda", dest="lambda_path", required=True, help="Lambda spec JSON")
        p.add_argument("--out", help="Output path")

    compute = sub.add_parser("compute", help="Risk report of one loss distribution")
    add_law_inputs(compute)
    compute.add_argument("--levels", default=DEFAULT_LEVELS, help="Comma-separated VaR/ES levels")
    compute.set_defaults(handler=cmd_compute)

    curve = sub.add_parser("curve", help="ES curve x -> ES_{Lambda(x)} as CSV")
    add_law_inputs(curve)
    curve.add_argument("--grid", help="lo:hi:n (default spans the support with a margin of 1)")
    curve.set_defaults(handler=cmd_curve)

    optimize = sub.add_parser("optimize", help="Portfolio optimisation with Lambda-ES")
    optimize.add_argument("--scenarios", required=True, help="CSV with header prob,asset_1,...,asset_n")
    optimize.add_argument("--lambda", dest="lambda_path", required=True, help="Lambda spec JSON")
    optimize.add_argument("--feasible", choices=["simplex", "box"], default="simplex")
    optimize.add_argument("--lo", default="0", help="Lower bound(s) of the box")
    optimize.add_argument("--hi", default="1", help="Upper bound(s) of the box")
    optimize.add_argument("--budget", action=argparse.BooleanOptionalAction, default=True,
                          help="Require weights of the box to sum to 1")
    optimize.add_argument("--ell", type=float, default=None,
                          help="Minimise ES at --level subject to Lambda-ES <= ell")
    optimize.add_argument("--level", type=float, default=0.95, help="Objective ES level of the constraint mode")
    optimize.add_argument("--out", help="Output path")
    optimize.set_defaults(handler=cmd_optimize)

    verify = sub.add_parser("verify", help="Run the property checks and counterexamples")
    verify.add_argument("--seed", type=int, default=None, help="Harness seed (default from settings)")
    verify.add_argument("--only", action="append", help="Check name(s) to run; repeatable or comma-separated")
    verify.add_argument("--trials", type=int, default=None, help="Override the trial count of every sweep")
    verify.add_argument("--list", action="store_true", help="List the available checks")
    verify.add_argument("--out", help="Output path")
    verify.set_defaults(handler=cmd_verify)
    return parser


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (InvalidInputError, PreconditionError, ValidationError, FileNotFoundError) as e:
        console.print(f"[bold red]Invalid input: {e}[/]")
        return EXIT_PARSE
    except InfeasibleProblemError as e:
        console.print(f"[bold red]Infeasible problem: {e}[/]")
        return EXIT_INFEASIBLE
    except LambdaESError as e:
        console.print(f"[bold red]Error: {e}[/]")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
