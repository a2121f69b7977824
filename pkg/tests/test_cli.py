"""End-to-end tests of the lambda-es command line."""

import csv
import json

import pytest

from src.cli.lambda_es import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_PROPERTY,
    RiskReport,
    build_risk_report,
    es_curve,
    main,
)
from src.risk.dist import DiscreteDistribution
from src.risk.lambdas import ConstantLambda
from src.verification.checks import PropertyReport
from src.verification.harness import CounterexampleCheck, PropertyHarness

STEP = {"type": "step", "breaks": [1.0, 1.5], "values": [0.9, 0.5, 0.2], "side": "right"}


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return {
        "dist": write("law.csv", "value,prob\n0,0.5\n2,0.5\n"),
        "one_atom": write("one.csv", "value,prob\n3.25,1\n"),
        "scenarios": write("scenarios.csv", "a,b\n1,0\n0,1\n2,2\n"),
        "lambda": write("lambda.json", json.dumps(STEP)),
        "constant": write("constant.json", json.dumps({"type": "constant", "alpha": 0.5})),
        "bad_lambda": write("bad.json", json.dumps({"type": "step", "breaks": [0], "values": [0.1, 0.9]})),
        "out": tmp_path / "out",
    }


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestCompute:
    def test_step_example(self, files):
        out = files["out"] / "risk.json"
        code = main(["compute", "--dist", files["dist"], "--lambda", files["lambda"], "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out)
        assert report["lambda_es"] == pytest.approx(1.5)
        assert report["lambda_var"] == pytest.approx(1.0)
        assert report["es_at_levels"]["0.5"] == pytest.approx(2.0)
        assert report["crossing_certificate"]["right_value"] == pytest.approx(1.25)

    def test_one_atom(self, files):
        out = files["out"] / "risk.json"
        code = main(["compute", "--dist", files["one_atom"], "--lambda", files["lambda"], "--levels", "0,1",
                     "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out)
        assert report["lambda_es"] == pytest.approx(3.25)
        assert report["var"] == {"0": "-inf", "1": 3.25}
        assert report["var_plus"]["1"] == "inf"

    def test_portfolio_loss(self, files):
        out = files["out"] / "risk.json"
        code = main(["compute", "--scenarios", files["scenarios"], "--theta", "0.5,0.5",
                     "--lambda", files["constant"], "--out", str(out)])
        assert code == EXIT_OK
        assert read_json(out)["lambda_es"] == pytest.approx(1.5)

    def test_rerun_from_saved_report_is_identical(self, tmp_path):
        law = tmp_path / "awkward.csv"
        law.write_text("value,prob\n0.1,0.3\n0.7,0.3\n2.3,0.4\n", encoding="utf-8")
        lam = tmp_path / "logistic.json"
        lam.write_text(json.dumps({"type": "logistic", "a": 1.7}), encoding="utf-8")
        first = tmp_path / "first.json"
        assert main(["compute", "--dist", str(law), "--lambda", str(lam), "--out", str(first)]) == EXIT_OK

        report = RiskReport.model_validate_json(first.read_text(encoding="utf-8"))
        saved_lam = tmp_path / "saved_lambda.json"
        saved_lam.write_text(json.dumps(report.lambda_spec), encoding="utf-8")
        second = tmp_path / "second.json"
        assert main(["compute", "--dist", str(law), "--lambda", str(saved_lam), "--out", str(second)]) == EXIT_OK

        assert first.read_bytes() == second.read_bytes()
        assert RiskReport.model_validate_json(second.read_text(encoding="utf-8")).lambda_es == report.lambda_es

    def test_invalid_lambda(self, files):
        assert main(["compute", "--dist", files["dist"], "--lambda", files["bad_lambda"]]) == EXIT_PARSE

    def test_missing_input(self, files):
        assert main(["compute", "--dist", "absent.csv", "--lambda", files["lambda"]]) == EXIT_PARSE

    def test_needs_a_law(self, files):
        assert main(["compute", "--lambda", files["lambda"]]) == EXIT_PARSE

    def test_wrong_theta_length(self, files):
        args = ["compute", "--scenarios", files["scenarios"], "--theta", "0.2,0.3,0.5", "--lambda", files["lambda"]]
        assert main(args) == EXIT_PARSE


class TestCurve:
    def test_crossing_is_flagged(self, files):
        out = files["out"] / "curve.csv"
        code = main(["curve", "--dist", files["dist"], "--lambda", files["lambda"], "--grid", "-1:3:5",
                     "--out", str(out)])
        assert code == EXIT_OK
        with open(out, newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 6
        assert [float(row["x"]) for row in rows] == sorted(float(row["x"]) for row in rows)
        flagged = [row for row in rows if row["x_star"] == "1"]
        assert len(flagged) == 1
        assert float(flagged[0]["x"]) == pytest.approx(1.5)
        assert float(flagged[0]["es"]) == pytest.approx(1.25)

    def test_default_grid(self, files):
        out = files["out"] / "curve.csv"
        assert main(["curve", "--dist", files["dist"], "--lambda", files["lambda"], "--out", str(out)]) == EXIT_OK
        with open(out, newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert float(rows[0]["x"]) == pytest.approx(-1.0)
        assert float(rows[-1]["x"]) == pytest.approx(3.0)

    def test_in_memory(self, demo_law, demo_step):
        points = es_curve(demo_law, demo_step, [0.0, 1.0, 2.0])
        assert sum(p.x_star for p in points) == 1
        for p in points:
            assert p.value == min(p.es, p.x)
        assert max(p.value for p in points) <= 1.5 + 1e-12


class TestOptimize:
    def test_lambda_es_mode(self, files):
        out = files["out"] / "opt.json"
        code = main(["optimize", "--scenarios", files["scenarios"], "--lambda", files["constant"], "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out)
        assert report["status"] == "optimal"
        assert report["asset_names"] == ["a", "b"]
        assert report["value"] == pytest.approx(1.5, abs=1e-9)
        assert report["lambda_es_at_theta"] == pytest.approx(1.5, abs=1e-9)
        assert sum(report["theta"]) == pytest.approx(1.0)

    def test_constraint_mode(self, files):
        out = files["out"] / "opt.json"
        code = main(["optimize", "--scenarios", files["scenarios"], "--lambda", files["lambda"],
                     "--ell", "100", "--level", "0.5", "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out)
        assert report["mode"] == "constraint"
        assert report["level"] == pytest.approx(0.2)
        assert report["value"] == pytest.approx(1.5, abs=1e-9)

    def test_infeasible(self, files):
        out = files["out"] / "opt.json"
        code = main(["optimize", "--scenarios", files["scenarios"], "--lambda", files["constant"],
                     "--ell", "-10", "--out", str(out)])
        assert code == EXIT_INFEASIBLE
        assert read_json(out)["status"] == "infeasible"

    def test_box(self, files):
        out = files["out"] / "opt.json"
        code = main(["optimize", "--scenarios", files["scenarios"], "--lambda", files["constant"],
                     "--feasible", "box", "--lo", "0.7,0", "--hi", "1", "--out", str(out)])
        assert code == EXIT_OK
        assert read_json(out)["theta"][0] == pytest.approx(0.7, abs=1e-9)

    def test_left_continuous_lambda(self, files, tmp_path):
        lam = tmp_path / "left.json"
        lam.write_text(json.dumps({**STEP, "side": "left"}), encoding="utf-8")
        assert main(["optimize", "--scenarios", files["scenarios"], "--lambda", str(lam)]) == EXIT_PARSE


class TestVerify:
    def test_list(self, capsys):
        assert main(["verify", "--list"]) == EXIT_OK
        assert "a2" in capsys.readouterr().out

    def test_only(self, files, fast_settings):
        out = files["out"] / "verification.json"
        code = main(["verify", "--only", "a2", "--only", "normalization,a3", "--seed", "5", "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out)
        assert [r["name"] for r in report["reports"]] == ["a2", "normalization", "a3"]
        assert report["seed"] == 5

    def test_unknown_check(self):
        assert main(["verify", "--only", "nope"]) == EXIT_PARSE

    def test_failed_check(self, files, monkeypatch):
        failing = CounterexampleCheck("broken", lambda: PropertyReport(name="broken", mismatches=["off"]))
        monkeypatch.setattr(
            "src.cli.lambda_es.PropertyHarness", lambda: PropertyHarness({"broken": failing})
        )
        out = files["out"] / "verification.json"
        assert main(["verify", "--out", str(out)]) == EXIT_PROPERTY
        assert read_json(out)["reports"][0]["mismatches"] == ["off"]

    def test_internal_key_error_is_not_an_input_error(self, monkeypatch):
        def broken():
            return {}["missing"]

        monkeypatch.setattr(
            "src.cli.lambda_es.PropertyHarness",
            lambda: PropertyHarness({"broken": CounterexampleCheck("broken", broken)}),
        )
        with pytest.raises(KeyError):
            main(["verify", "--only", "broken"])


class TestBuildRiskReport:
    def test_constant_lambda(self):
        law = DiscreteDistribution.from_mapping({0.0: 0.5, 10.0: 0.5})
        report = build_risk_report(law, ConstantLambda(alpha=0.5), [0.5])
        assert report.lambda_es == pytest.approx(report.es_at_levels["0.5"])
        assert report.lambda_spec == {"type": "constant", "alpha": 0.5}
