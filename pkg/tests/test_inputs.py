"""Tests for the CSV and JSON loaders of the command line."""

import json

import numpy as np
import pytest

from src.cli.inputs import (
    load_distribution_csv,
    load_lambda_json,
    load_scenarios_csv,
    parse_grid,
    parse_levels,
)
from src.errors import InvalidInputError
from src.risk.lambdas import StepLambda


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestDistributionCsv:
    def test_loads_and_sorts(self, tmp_path):
        path = write(tmp_path / "law.csv", "value,prob\n2,0.5\n0,0.25\n0,0.25\n")
        law = load_distribution_csv(path)
        assert law.atoms == (0.0, 2.0)
        assert law.probs == pytest.approx((0.5, 0.5))

    def test_renormalises_small_drift(self, tmp_path):
        path = write(tmp_path / "law.csv", "value,prob\n1,0.3333333\n2,0.3333333\n3,0.3333333\n")
        assert sum(load_distribution_csv(path).probs) == pytest.approx(1.0, abs=1e-15)

    def test_drops_zero_rows(self, tmp_path):
        path = write(tmp_path / "law.csv", "value,prob\n1,0\n2,1\n")
        assert load_distribution_csv(path).atoms == (2.0,)

    @pytest.mark.parametrize(
        "text",
        [
            "x,p\n1,1\n",
            "value,prob\n",
            "value,prob\n1,0.5\n",
            "value,prob\n1,abc\n",
            "value,prob\n1,0.5,3\n",
            "value,prob\n1,-0.5\n2,1.5\n",
            "value,prob\ninf,1\n",
        ],
    )
    def test_rejects(self, tmp_path, text):
        with pytest.raises(InvalidInputError):
            load_distribution_csv(write(tmp_path / "law.csv", text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_distribution_csv(tmp_path / "absent.csv")


class TestScenariosCsv:
    def test_equally_likely(self, tmp_path):
        path = write(tmp_path / "s.csv", "bonds,stocks\n1,0\n0,1\n2,2\n")
        scenarios = load_scenarios_csv(path)
        assert scenarios.asset_names == ("bonds", "stocks")
        assert scenarios.probs == pytest.approx((1 / 3, 1 / 3, 1 / 3))
        np.testing.assert_array_equal(scenarios.matrix, [[1, 0], [0, 1], [2, 2]])

    def test_prob_column(self, tmp_path):
        path = write(tmp_path / "s.csv", "prob,a,b\n0.25,1,0\n0,5,5\n0.75,0,1\n")
        scenarios = load_scenarios_csv(path)
        assert scenarios.num_scenarios == 2
        assert scenarios.probs == pytest.approx((0.25, 0.75))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_scenarios_csv(write(tmp_path / "s.csv", "a,b\n1,2\n3\n"))

    def test_header_only(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_scenarios_csv(write(tmp_path / "s.csv", "a,b\n"))


class TestLambdaJson:
    def test_step(self, tmp_path):
        path = write(tmp_path / "lam.json", json.dumps({"type": "step", "breaks": [1, 1.5], "values": [0.9, 0.5, 0.2]}))
        lam = load_lambda_json(path)
        assert isinstance(lam, StepLambda)
        assert lam.eval(1.5) == 0.2

    @pytest.mark.parametrize("text", ["[1, 2]", "{not json", '{"type": "constant", "alpha": 2}'])
    def test_rejects(self, tmp_path, text):
        with pytest.raises(InvalidInputError):
            load_lambda_json(write(tmp_path / "lam.json", text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_lambda_json(tmp_path / "absent.json")


class TestParsers:
    def test_levels(self):
        assert parse_levels("0.5, 0.9,1") == [0.5, 0.9, 1.0]

    @pytest.mark.parametrize("text", ["", "0.5,abc", "1.5", "-0.1"])
    def test_bad_levels(self, text):
        with pytest.raises(InvalidInputError):
            parse_levels(text)

    def test_grid(self):
        np.testing.assert_allclose(parse_grid("0:1:5"), [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_array_equal(parse_grid("2:2:1"), [2.0])

    @pytest.mark.parametrize("text", ["0:1", "1:0:3", "0:1:0", "a:1:3", "0:1:1"])
    def test_bad_grid(self, text):
        with pytest.raises(InvalidInputError):
            parse_grid(text)
