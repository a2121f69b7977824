"""Tests for the dual function R and the witness measure change."""

import math

import numpy as np
import pytest

from src.errors import ContinuityError, InvalidInputError
from src.risk.dist import RandomVector
from src.risk.dual import (
    MeasureChange,
    dual_lower_bound_check,
    r_function,
    r_properties_check,
    witness_supremum,
)
from src.risk.lambdas import ConstantLambda, StepLambda
from src.risk.measures import lambda_es
from src.verification.generators import random_measure_change, random_step_lambda, random_vector


@pytest.fixture
def demo_vector() -> RandomVector:
    return RandomVector(probs=(0.5, 0.5), variables={"X": (0.0, 2.0)})


class TestMeasureChange:
    def test_identity(self):
        q = MeasureChange.identity((0.25, 0.75))
        np.testing.assert_allclose(q.density(), [1.0, 1.0])
        assert q.min_inverse_density() == pytest.approx(1.0)

    def test_zero_mass_points_are_ignored(self):
        q = MeasureChange(base_probs=(0.25, 0.75), alt_probs=(1.0, 0.0))
        assert q.min_inverse_density() == pytest.approx(0.25)
        assert q.expectation([4.0, 100.0]) == pytest.approx(4.0)

    def test_mismatched_support(self):
        with pytest.raises(InvalidInputError):
            MeasureChange(base_probs=(0.5, 0.5), alt_probs=(1.0,))


class TestRFunction:
    def test_identity_measure_returns_t(self, demo_step):
        q = MeasureChange.identity((0.5, 0.5))
        assert r_function(3.0, q, demo_step) == 3.0

    def test_concentrated_measure(self):
        q = MeasureChange(base_probs=(0.25, 0.75), alt_probs=(1.0, 0.0))
        assert r_function(5.0, q, ConstantLambda(alpha=0.5)) == -math.inf

    def test_step_level_set(self):
        lam = StepLambda(breaks=(1.5,), values=(0.9, 0.2), side="right")
        q = MeasureChange(base_probs=(0.5, 0.5), alt_probs=(0.0, 1.0))
        assert r_function(3.0, q, lam) == pytest.approx(1.5)
        assert r_function(1.0, q, lam) == pytest.approx(1.0)

    def test_against_grid_supremum(self):
        lam = StepLambda(breaks=(1.5,), values=(0.9, 0.2), side="right")
        q = MeasureChange(base_probs=(0.5, 0.5), alt_probs=(0.0, 1.0))
        grid = np.linspace(-5.0, 5.0, 100001)
        levels = lam.evaluate_many(grid)
        upper = grid[levels >= 0.5].max()
        assert r_function(3.0, q, lam) == pytest.approx(upper, abs=1e-3)


class TestDualLowerBound:
    def test_identity_measure_gives_the_mean(self, demo_vector, demo_step):
        bound = dual_lower_bound_check(demo_vector, demo_step, MeasureChange.identity(demo_vector.probs))
        assert bound.lhs == pytest.approx(1.0)
        assert bound.rhs == pytest.approx(1.5)
        assert bound.ok

    def test_random_measures_never_exceed(self, rng):
        for _ in range(200):
            vector = random_vector(rng, 20, names=("X",))
            lam = random_step_lambda(rng)
            q = random_measure_change(rng, vector.probs)
            assert dual_lower_bound_check(vector, lam, q).ok


class TestWitness:
    def test_degenerate_law(self, demo_step):
        vector = RandomVector(probs=(0.5, 0.5), variables={"X": (3.0, 3.0)})
        lam = demo_step.model_copy(update={"side": "left"})
        q = witness_supremum(vector, lam)
        assert r_function(q.expectation(vector.values("X")), q, lam) == pytest.approx(3.0)

    def test_attains_lambda_es(self, demo_vector):
        lam = StepLambda(breaks=(1.0, 1.5), values=(0.9, 0.5, 0.2), side="left")
        q = witness_supremum(demo_vector, lam)
        value, _ = lambda_es(demo_vector.law("X"), lam)
        assert r_function(q.expectation(demo_vector.values("X")), q, lam) == pytest.approx(value, abs=1e-8)

    def test_random_left_continuous_steps(self, rng):
        for _ in range(50):
            vector = random_vector(rng, 10, names=("X",))
            lam = random_step_lambda(rng, side="left")
            q = witness_supremum(vector, lam)
            value, _ = lambda_es(vector.law("X"), lam)
            attained = r_function(q.expectation(vector.values("X")), q, lam)
            assert attained == pytest.approx(value, abs=1e-8)

    def test_right_continuous_jump_is_rejected(self, demo_vector, demo_step):
        with pytest.raises(ContinuityError):
            witness_supremum(demo_vector, demo_step)


class TestRProperties:
    def test_constant_lambda(self, rng):
        q = random_measure_change(rng, (0.2, 0.3, 0.5))
        report = r_properties_check(q, ConstantLambda(alpha=0.6), np.linspace(-5.0, 5.0, 101))
        assert report.ok

    def test_identity_measure_is_the_identity(self, demo_step):
        q = MeasureChange.identity((0.5, 0.5))
        ts = np.linspace(-3.0, 3.0, 61)
        report = r_properties_check(q, demo_step, ts)
        assert report.ok
        assert [r_function(float(t), q, demo_step) for t in ts] == pytest.approx(ts.tolist())

    def test_unbounded_below(self, rng, demo_step):
        for _ in range(2):
            q = random_measure_change(rng, (0.25, 0.25, 0.5))
            assert r_function(-math.inf, q, demo_step) == -math.inf
