"""Tests for the T-functional, the RU programs and portfolio Lambda-ES."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from src.errors import ContinuityError, InfeasibleProblemError, InvalidInputError
from src.optimization.ru_opt import (
    BoxSet,
    ScenarioMatrix,
    SimplexSet,
    constraint_rewrite,
    convexity_regime_report,
    cvar_lp,
    law_of_portfolio,
    min_es_at_level,
    min_objective_with_lambda_es_constraint,
    min_portfolio_lambda_es,
    minimize_t,
    portfolio_losses,
    t_functional,
)
from src.risk.dist import DiscreteDistribution
from src.risk.lambdas import ConstantLambda, LogisticLambda, StepLambda
from src.risk.measures import es, lambda_es, var_left, var_right
from tests.strategies import discrete_laws, levels, step_lambdas, values


def simplex_grid(n: int, step: float):
    k = round(1.0 / step)
    for combo in itertools.product(range(k + 1), repeat=n - 1):
        if sum(combo) <= k:
            yield np.array([*combo, k - sum(combo)], dtype=float) / k


def portfolio_es(scenarios, theta, alpha):
    return es(law_of_portfolio(scenarios, theta).law("loss"), alpha)


def portfolio_lambda_es(scenarios, theta, lam):
    return lambda_es(law_of_portfolio(scenarios, theta).law("loss"), lam)[0]


class TestScenarioMatrix:
    def test_default_names(self, small_scenarios):
        assert small_scenarios.asset_names == ("asset_1", "asset_2")
        assert small_scenarios.num_scenarios == 3
        np.testing.assert_allclose(portfolio_losses(small_scenarios, [0.5, 0.5]), [0.5, 0.5, 2.0])

    def test_ragged_rows(self):
        with pytest.raises(InvalidInputError):
            ScenarioMatrix.uniform([[1.0, 2.0], [1.0]])

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            ScenarioMatrix(losses=[[1.0], [2.0]], probs=[0.5, 0.6])

    def test_box_needs_one_bound_per_asset(self, small_scenarios):
        with pytest.raises(InvalidInputError):
            BoxSet(lo=(0.0,), hi=(1.0,)).constraints(small_scenarios.num_assets)


class TestTFunctional:
    def test_level_one_with_mass_above(self, two_atom):
        lam = ConstantLambda(alpha=1.0)
        assert t_functional(5.0, 0.0, two_atom, lam) == math.inf

    def test_constant_level_reduces_to_ru(self, two_atom):
        lam = ConstantLambda(alpha=0.3)
        value = t_functional(var_left(two_atom, 0.3), -1e6, two_atom, lam)
        assert value == pytest.approx(es(two_atom, 0.3))

    def test_degenerate(self, demo_step):
        dist = DiscreteDistribution.point_mass(1.25)
        assert t_functional(1.25, 1.25, dist, demo_step) == pytest.approx(1.25)


class TestMinimizeT:
    def test_constant_lambda(self, two_atom):
        result = minimize_t(two_atom, ConstantLambda(alpha=0.3))
        assert result.value == pytest.approx(es(two_atom, 0.3))
        assert var_left(two_atom, 0.3) <= result.a_star <= var_right(two_atom, 0.3)

    def test_step_example(self, demo_law, demo_step):
        result = minimize_t(demo_law, demo_step)
        assert result.value == pytest.approx(1.5)
        assert result.x_star == pytest.approx(1.5)

    def test_step_example_against_grid(self, demo_law, demo_step):
        grid = np.arange(-1.0, 3.0, 1e-2)
        best = min(t_functional(a, x, demo_law, demo_step) for a in grid[::5] for x in grid)
        assert minimize_t(demo_law, demo_step).value == pytest.approx(best, abs=2e-2)
        assert minimize_t(demo_law, demo_step).value <= best + 1e-12

    def test_degenerate(self, demo_step):
        result = minimize_t(DiscreteDistribution.point_mass(0.5), demo_step)
        assert tuple(result) == pytest.approx((0.5, 0.5, 0.5))

    def test_left_continuous_step_is_rejected(self, demo_law):
        lam = StepLambda(breaks=(1.0,), values=(0.9, 0.2), side="left")
        with pytest.raises(ContinuityError):
            minimize_t(demo_law, lam)

    @given(discrete_laws(), step_lambdas(side="right"))
    @settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_matches_lambda_es(self, dist, lam):
        value, _ = lambda_es(dist, lam)
        assert minimize_t(dist, lam).value == pytest.approx(value, rel=1e-9, abs=1e-9)


class TestConstraintRewrite:
    def test_constant(self):
        assert constraint_rewrite(ConstantLambda(alpha=0.7), 12.0) == 0.7

    def test_step_example(self, demo_law, demo_step):
        level = constraint_rewrite(demo_step, 1.5)
        assert level == 0.2
        assert es(demo_law, level) == pytest.approx(1.25)
        assert lambda_es(demo_law, demo_step)[0] <= 1.5 + 1e-12

    @given(discrete_laws(), step_lambdas(side="right"), values)
    @settings(max_examples=100, deadline=None)
    def test_biconditional(self, dist, lam, ell):
        value, _ = lambda_es(dist, lam)
        rewritten = es(dist, constraint_rewrite(lam, ell))
        # near-ties are decided by rounding on both sides
        if abs(value - ell) > 1e-9 and abs(rewritten - ell) > 1e-9:
            assert (value <= ell) == (rewritten <= ell)


class TestConvexityRegime:
    def test_constant_lambda(self, two_atom):
        report = convexity_regime_report(ConstantLambda(alpha=0.8), two_atom, trials=50)
        assert report.joint_convex
        assert report.x_convex_observed
        assert report.quasi_convexity_violation is None
        assert report.ok

    def test_logistic(self, two_atom):
        report = convexity_regime_report(LogisticLambda(a=2.0), two_atom, trials=50)
        assert report.joint_convex
        assert report.x_convex_predicted
        assert report.quasi_convexity_violation is not None
        v = report.quasi_convexity_violation
        assert v.midpoint_value > max(v.endpoint_values)

    def test_step(self, two_atom, demo_step):
        report = convexity_regime_report(demo_step, two_atom, trials=50)
        assert report.x_convex_predicted is False
        assert report.quasi_convexity_violation is not None
        assert report.ok


class TestCvarLP:
    def test_single_asset(self):
        scenarios = ScenarioMatrix(losses=[[1.0], [3.0], [-2.0]], probs=[0.2, 0.3, 0.5])
        solution = cvar_lp(scenarios, 0.6, SimplexSet())
        assert solution.theta == pytest.approx((1.0,))
        assert solution.value == pytest.approx(es(DiscreteDistribution(atoms=[1.0, 3.0, -2.0], probs=[0.2, 0.3, 0.5]), 0.6))

    def test_two_assets_against_grid(self, small_scenarios):
        solution = cvar_lp(small_scenarios, 0.5, SimplexSet())
        best = min(portfolio_es(small_scenarios, [t, 1.0 - t], 0.5) for t in np.linspace(0.0, 1.0, 1001))
        assert solution.value == pytest.approx(best, abs=1e-4)
        assert solution.value == pytest.approx(1.5)
        assert portfolio_es(small_scenarios, solution.theta, 0.5) == pytest.approx(solution.value, abs=1e-7)

    def test_duplicate_assets(self):
        scenarios = ScenarioMatrix.uniform([[1.0, 1.0], [4.0, 4.0], [0.0, 0.0]])
        solution = cvar_lp(scenarios, 0.5, SimplexSet())
        assert solution.value == pytest.approx(portfolio_es(scenarios, [1.0, 0.0], 0.5))
        assert solution.value == pytest.approx(portfolio_es(scenarios, [0.0, 1.0], 0.5))

    def test_box_without_budget(self, small_scenarios):
        solution = cvar_lp(small_scenarios, 0.5, BoxSet(lo=(0.1, 0.1), hi=(1.0, 1.0), budget=False))
        np.testing.assert_allclose(solution.theta, [0.1, 0.1], atol=1e-9)

    def test_level_one_is_rejected(self, small_scenarios):
        with pytest.raises(InvalidInputError):
            cvar_lp(small_scenarios, 1.0, SimplexSet())

    def test_level_one_is_the_minimax_program(self, small_scenarios):
        solution = min_es_at_level(small_scenarios, 1.0, SimplexSet())
        assert solution.value == pytest.approx(2.0)

    def test_empty_box_is_infeasible(self, small_scenarios):
        with pytest.raises(InfeasibleProblemError):
            cvar_lp(small_scenarios, 0.5, BoxSet(lo=(0.6, 0.6), hi=(1.0, 1.0), budget=True))

    @given(levels.filter(lambda a: a < 1.0), st.integers(0, 2**16))
    @settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_matches_direct_es(self, alpha, seed):
        rng = np.random.default_rng(seed)
        scenarios = ScenarioMatrix.uniform(np.round(rng.uniform(-2.0, 3.0, (8, 3)), 3).tolist())
        solution = cvar_lp(scenarios, alpha, SimplexSet())
        assert portfolio_es(scenarios, solution.theta, alpha) == pytest.approx(solution.value, abs=1e-7)


class TestPortfolioLambdaES:
    def test_constant_lambda_matches_cvar_lp(self, small_scenarios):
        solution = min_portfolio_lambda_es(small_scenarios, ConstantLambda(alpha=0.5), SimplexSet())
        assert solution.value == pytest.approx(cvar_lp(small_scenarios, 0.5, SimplexSet()).value, abs=1e-9)

    def test_single_asset(self, demo_law, demo_step):
        scenarios = ScenarioMatrix.uniform([[0.0], [2.0]])
        solution = min_portfolio_lambda_es(scenarios, demo_step, SimplexSet())
        assert solution.value == pytest.approx(lambda_es(demo_law, demo_step)[0], abs=1e-9)

    def test_three_assets_against_grid(self, ten_scenarios):
        lam = StepLambda(breaks=(0.0, 1.0), values=(0.9, 0.6, 0.3), side="right")
        solution = min_portfolio_lambda_es(ten_scenarios, lam, SimplexSet())
        best = min(portfolio_lambda_es(ten_scenarios, theta, lam) for theta in simplex_grid(3, 0.02))
        assert solution.value <= best + 1e-9
        assert portfolio_lambda_es(ten_scenarios, solution.theta, lam) == pytest.approx(solution.value, abs=1e-6)

    def test_golden_section_for_convex_inverse_gap(self, ten_scenarios):
        solution = min_portfolio_lambda_es(ten_scenarios, LogisticLambda(a=1.0), SimplexSet())
        assert solution.golden_section_value == pytest.approx(solution.value, abs=1e-6)

    def test_left_continuous_step_is_rejected(self, small_scenarios):
        lam = StepLambda(breaks=(1.0,), values=(0.9, 0.2), side="left")
        with pytest.raises(ContinuityError):
            min_portfolio_lambda_es(small_scenarios, lam, SimplexSet())


class TestLambdaESConstraint:
    def test_slack_constraint(self, small_scenarios, demo_step):
        solution = min_objective_with_lambda_es_constraint(small_scenarios, 0.5, demo_step, 100.0, SimplexSet())
        assert solution.value == pytest.approx(cvar_lp(small_scenarios, 0.5, SimplexSet()).value, abs=1e-9)

    def test_unreachable_bound(self, small_scenarios, demo_step):
        with pytest.raises(InfeasibleProblemError):
            min_objective_with_lambda_es_constraint(small_scenarios, 0.5, demo_step, -1.0, SimplexSet())

    def test_binding_constraint_against_grid(self):
        scenarios = ScenarioMatrix.uniform([[3.0, 0.5], [-1.0, 1.0], [0.0, 1.5], [2.0, 0.0]])
        lam = StepLambda(breaks=(1.0,), values=(0.9, 0.5), side="right")
        ell = 1.2
        solution = min_objective_with_lambda_es_constraint(scenarios, 0.0, lam, ell, SimplexSet())
        feasible = [
            portfolio_es(scenarios, [t, 1.0 - t], 0.0)
            for t in np.linspace(0.0, 1.0, 2001)
            if portfolio_lambda_es(scenarios, [t, 1.0 - t], lam) <= ell + 1e-12
        ]
        assert feasible
        assert solution.value == pytest.approx(min(feasible), abs=1e-3)
        assert portfolio_lambda_es(scenarios, solution.theta, lam) <= ell + 1e-7
