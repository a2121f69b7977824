"""Tests for the verification harness."""

import json

import pytest

from src.errors import InvalidInputError
from src.verification.harness import CounterexampleCheck, PropertyHarness, default_checks, save_report


def _stable(report):
    return [r.model_dump(exclude={"duration_seconds"}) for r in report.reports]


class TestDefaultChecks:
    def test_suite_contents(self):
        names = set(default_checks())
        assert {"a1", "a2", "a3", "convexity_failure", "dual_bound", "portfolio_consistency"} <= names
        assert "monotonicity[lambda_es]" in names

    def test_counterexamples_expect_failures(self):
        checks = default_checks()
        assert all(isinstance(checks[name], CounterexampleCheck) for name in ("a1", "a2", "a3"))
        assert checks["a2"].expect_failures


class TestPropertyHarness:
    def test_select_unknown(self):
        with pytest.raises(InvalidInputError):
            PropertyHarness().select(["normalization", "nope"])

    def test_run_selected(self, fast_settings):
        report = PropertyHarness().select(["normalization", "a2"]).run(seed=3, trials=5)
        assert [r.name for r in report.reports] == ["normalization", "a2"]
        assert report.ok
        assert report.failed == []
        assert report.seed == 3
        assert all(r.seed == 3 for r in report.reports)

    def test_counterexamples_ignore_trial_override(self, fast_settings):
        report = PropertyHarness().select(["a3"]).run(seed=3, trials=50)
        assert report.reports[0].trials == 1

    def test_deterministic(self, fast_settings):
        harness = PropertyHarness().select(["cash_subadditivity", "quasi_convexity"])
        assert _stable(harness.run(seed=11, trials=5)) == _stable(harness.run(seed=11, trials=5))

    def test_check_streams_are_independent(self, fast_settings):
        alone = PropertyHarness().select(["quasi_convexity"]).run(seed=11, trials=5)
        together = PropertyHarness().select(["cash_subadditivity", "quasi_convexity"]).run(seed=11, trials=5)
        assert _stable(alone)[0] == _stable(together)[1]

    def test_configuration_is_embedded(self, fast_settings):
        report = PropertyHarness().select(["normalization"]).run(seed=1, trials=2)
        assert report.configuration["property_trials"] == "20"
        assert "seed" in report.configuration


class TestSaveReport:
    def test_writes_json(self, fast_settings, tmp_path):
        report = PropertyHarness().select(["a3"]).run(seed=1)
        path = tmp_path / "nested" / "verification.json"
        save_report(report, path)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["seed"] == 1
        assert data["reports"][0]["name"] == "a3"
        assert data["reports"][0]["details"]["margin"] == pytest.approx(1 / 12)
