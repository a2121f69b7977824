"""Harness running property checks and counterexample reproductions."""

import json
import logging
import time
import zlib
from collections.abc import Callable
from datetime import datetime
from pathlib import Path

import numpy as np
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table
from tqdm import tqdm

from src.config import settings
from src.errors import InvalidInputError, LambdaESError
from src.utils import to_json_value, write_atomic
from src.verification.checks import (
    BisectionAgreementCheck,
    CashSubadditivityCheck,
    ConstraintRewriteCheck,
    ConvexityFailureCheck,
    ConvexityRegimeCheck,
    DominanceCheck,
    DualBoundCheck,
    ESSelfConsistencyCheck,
    FinitenessCheck,
    L1ContinuityCheck,
    LambdaMonotonicityCheck,
    MixtureQuasiConcavityCheck,
    MonotonicityCheck,
    NormalizationCheck,
    PortfolioConsistencyCheck,
    PropertyCheck,
    PropertyReport,
    QuasiConvexityCheck,
    RepresentationIdentityCheck,
    RUEquivalenceCheck,
    SSDConsistencyCheck,
    TailInvarianceCheck,
)
from src.verification.counterexamples import (
    counterexample_a1,
    counterexample_a2,
    counterexample_a3,
)

console = Console()
logger = logging.getLogger(__name__)


class CounterexampleCheck(PropertyCheck):
    """Deterministic reproduction wrapped as a check; seeds and trial counts are ignored."""

    expect_failures = True

    def __init__(self, name: str, builder: Callable[[], PropertyReport]):
        self.name = name
        self.builder = builder

    def default_trials(self) -> int:
        return 1

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        return self.builder().model_copy(update={"name": self.name})


def default_checks() -> dict[str, PropertyCheck]:
    """Every check of the suite, keyed by the name accepted by ``--only``."""
    checks: list[PropertyCheck] = [
        *(MonotonicityCheck(measure) for measure in ("lambda_var", "lambda_es", "es", "var_left")),
        CashSubadditivityCheck(),
        QuasiConvexityCheck(),
        MixtureQuasiConcavityCheck(),
        SSDConsistencyCheck(),
        L1ContinuityCheck(),
        NormalizationCheck(),
        LambdaMonotonicityCheck(),
        DominanceCheck(),
        FinitenessCheck(),
        RepresentationIdentityCheck(),
        RUEquivalenceCheck(),
        ESSelfConsistencyCheck(),
        BisectionAgreementCheck(),
        TailInvarianceCheck(),
        DualBoundCheck(),
        ConstraintRewriteCheck(),
        ConvexityRegimeCheck(),
        PortfolioConsistencyCheck(),
        ConvexityFailureCheck(),
        CounterexampleCheck("a1", counterexample_a1),
        CounterexampleCheck("a2", counterexample_a2),
        CounterexampleCheck("a3", counterexample_a3),
    ]
    return {check.name: check for check in checks}


class HarnessReport(BaseModel):
    """Aggregated outcome of a harness run."""

    timestamp: str
    seed: int
    configuration: dict[str, str]  # active settings, field by field
    total_duration_seconds: float
    reports: list[PropertyReport]

    @property
    def ok(self) -> bool:
        return all(report.ok for report in self.reports)

    @property
    def failed(self) -> list[str]:
        return [report.name for report in self.reports if not report.ok]


class PropertyHarness:
    """Runs a set of checks with per-check generators derived from one seed."""

    def __init__(self, checks: dict[str, PropertyCheck] | None = None):
        """
        Initialize the harness.

        Args:
            checks: Checks keyed by name; the full suite when omitted
        """
        self.checks = default_checks() if checks is None else checks

    def select(self, only: list[str]) -> "PropertyHarness":
        unknown = sorted(set(only) - set(self.checks))
        if unknown:
            raise InvalidInputError(f"unknown checks: {', '.join(unknown)}")
        return PropertyHarness({name: self.checks[name] for name in only})

    @staticmethod
    def _rng_for(seed: int, name: str) -> np.random.Generator:
        # independent of which other checks run
        return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))

    def run(self, seed: int | None = None, trials: int | None = None) -> HarnessReport:
        """
        Run every check.

        Args:
            seed: Harness seed; ``settings.seed`` when omitted
            trials: Override of the trial count of every random sweep

        Returns:
            Harness report with one entry per check
        """
        seed = settings.seed if seed is None else seed
        start_time = time.time()
        console.print(f"\n[bold blue]Running {len(self.checks)} checks with seed {seed}...[/]\n")

        reports = []
        for name, check in tqdm(self.checks.items(), desc="  Checks", unit="check", leave=True):
            check_start = time.time()
            count = check.default_trials() if trials is None or isinstance(check, CounterexampleCheck) else trials
            try:
                report = check.run(self._rng_for(seed, name), count)
            except LambdaESError as err:
                logger.error("Check %s raised %s", name, err)
                report = PropertyReport(
                    name=name,
                    failures=1,
                    expect_failures=check.expect_failures,
                    mismatches=[f"{type(err).__name__}: {err}"],
                )
            report.seed = seed
            report.duration_seconds = time.time() - check_start
            reports.append(report)
            colour = "green" if report.ok else "red"
            console.print(
                f"[bold {colour}]{name}: {report.failures} failures in {report.trials} trials "
                f"(completed in {report.duration_seconds:.1f}s)[/]\n"
            )

        total_duration = time.time() - start_time
        report = HarnessReport(
            timestamp=datetime.now().isoformat(),
            seed=seed,
            configuration=self._get_configuration(),
            total_duration_seconds=total_duration,
            reports=reports,
        )
        console.print(f"[bold cyan]Total verification time: {total_duration:.1f}s[/]\n")
        self._print_summary(report)
        return report

    def _get_configuration(self) -> dict[str, str]:
        return {field_name: str(getattr(settings, field_name)) for field_name in settings.model_fields.keys()}

    def _print_summary(self, report: HarnessReport) -> None:
        """Print summary table of the run."""
        table = Table(title="Verification Summary", show_header=True, header_style="bold")
        table.add_column("Check", style="cyan")
        table.add_column("Trials", justify="right")
        table.add_column("Failures", justify="right")
        table.add_column("Expected", justify="center")
        table.add_column("Verdict", justify="center")
        table.add_column("Duration", justify="right", style="magenta")

        for item in report.reports:
            if item.skipped_reason is not None:
                verdict = "[yellow]skipped[/yellow]"
            elif item.ok:
                verdict = "[green]pass[/green]"
            else:
                verdict = "[red]FAIL[/red]"
            table.add_row(
                item.name,
                str(item.trials),
                str(item.failures),
                "> 0" if item.expect_failures else "0",
                verdict,
                f"{item.duration_seconds:.1f}s",
            )

        console.print("\n")
        console.print(table)
        console.print("\n")


def save_report(report: BaseModel, path: Path) -> None:
    """Write a report as JSON with 17 significant digits, atomically."""
    text = json.dumps(to_json_value(report.model_dump()), indent=2, ensure_ascii=False)
    write_atomic(path, text + "\n")
