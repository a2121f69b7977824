"""Tests for distributions, mixtures, stop-loss and random vectors."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from src.errors import InvalidInputError, ZeroProbabilityEventError
from src.risk.dist import (
    DiscreteDistribution,
    PiecewiseLinearQuantileDistribution,
    RandomVector,
    cdf,
    conditional_tail_expectation,
    icx_dominates,
    law_of,
    mixture,
    stop_loss,
)
from src.verification.counterexamples import a1_laws
from tests.strategies import discrete_laws, laws, values


class TestConstruction:
    """Validation of the law constructors."""

    def test_atoms_are_sorted_and_merged(self):
        dist = DiscreteDistribution(atoms=[2.0, 0.0, 2.0], probs=[0.25, 0.5, 0.25])
        assert dist.atoms == (0.0, 2.0)
        assert dist.probs == pytest.approx((0.5, 0.5))

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            DiscreteDistribution(atoms=[0.0, 1.0], probs=[0.5, 0.4])

    def test_probabilities_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            DiscreteDistribution(atoms=[0.0, 1.0], probs=[1.5, -0.5])

    def test_atoms_must_be_finite(self):
        with pytest.raises(InvalidInputError):
            DiscreteDistribution(atoms=[0.0, math.inf], probs=[0.5, 0.5])

    def test_segments_must_cover_unit_interval(self):
        with pytest.raises(InvalidInputError):
            PiecewiseLinearQuantileDistribution(segments=[(0.0, 0.5, 0.0, 1.0)])

    def test_quantile_must_not_decrease(self):
        with pytest.raises(InvalidInputError):
            PiecewiseLinearQuantileDistribution(segments=[(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.5, 2.0)])

    def test_law_of_drops_null_points(self):
        dist = law_of([3.0, 1.0, 2.0], [0.5, 0.5, 0.0])
        assert dist.atoms == (1.0, 3.0)

    def test_moments_and_support(self, two_atom):
        assert two_atom.mean == pytest.approx(5.0)
        assert (two_atom.ess_inf, two_atom.ess_sup) == (0.0, 10.0)
        assert not two_atom.is_degenerate
        assert DiscreteDistribution.point_mass(3.0).is_degenerate


class TestCdf:
    def test_atom_mass_at_left_endpoint(self, two_atom):
        assert cdf(two_atom, 0.0) == 0.5

    def test_between_atoms(self, two_atom):
        assert cdf(two_atom, 9.99) == 0.5

    def test_below_and_above_support(self, two_atom):
        assert cdf(two_atom, -1.0) == 0.0
        assert cdf(two_atom, 10.0) == 1.0

    def test_left_limit_excludes_the_atom(self, two_atom):
        assert two_atom.cdf_left(0.0) == 0.0
        assert two_atom.cdf_left(10.0) == 0.5

    def test_uniform_inverse(self):
        uniform = PiecewiseLinearQuantileDistribution.uniform(0.0, 1.0)
        assert cdf(uniform, 0.3) == pytest.approx(0.3)

    def test_uniform_against_numeric_inversion(self):
        uniform = PiecewiseLinearQuantileDistribution.uniform(-1.0, 3.0)
        omegas = (np.arange(10**6) + 0.5) / 10**6
        samples = np.array([uniform.var_left(float(w)) for w in omegas[::1000]])
        assert np.mean(samples <= 0.5) == pytest.approx(cdf(uniform, 0.5), abs=2e-3)

    def test_vectorised(self, two_atom):
        np.testing.assert_allclose(two_atom.cdf(np.array([-1.0, 0.0, 5.0, 10.0])), [0.0, 0.5, 0.5, 1.0])


class TestQuantiles:
    def test_left_and_right_quantiles(self, two_atom):
        assert two_atom.var_left(0.5) == 0.0
        assert two_atom.var_right(0.5) == 10.0

    def test_conventions_at_zero_and_one(self, two_atom):
        assert two_atom.var_left(0.0) == -math.inf
        assert two_atom.var_right(1.0) == math.inf
        assert two_atom.var_left(1.0) == 10.0

    def test_invalid_level(self, two_atom):
        with pytest.raises(InvalidInputError):
            two_atom.var_left(1.5)

    def test_tail_integral_of_uniform(self):
        uniform = PiecewiseLinearQuantileDistribution.uniform(0.0, 1.0)
        assert uniform.tail_integral(0.5) == pytest.approx(0.375)
        assert uniform.tail_integral(0.0) == pytest.approx(0.5)

    @given(laws, st.integers(1, 99).map(lambda k: k / 100))
    @settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_left_quantile_never_exceeds_right(self, dist, alpha):
        assert dist.var_left(alpha) <= dist.var_right(alpha)
        assert dist.cdf(dist.var_left(alpha)) >= alpha - 1e-12


class TestMixture:
    def test_full_weight_is_identity(self, two_atom, demo_law):
        assert mixture(two_atom, demo_law, 1.0) is two_atom

    def test_two_point_mixture(self):
        mixed = mixture(DiscreteDistribution.point_mass(0.0), DiscreteDistribution.point_mass(1.0), 0.5)
        assert mixed.atoms == (0.0, 1.0)
        assert mixed.probs == pytest.approx((0.5, 0.5))

    def test_invalid_weight(self, two_atom):
        with pytest.raises(InvalidInputError):
            mixture(two_atom, two_atom, 1.2)

    def test_random_laws_match_cdf_summation(self, rng):
        first = DiscreteDistribution(atoms=rng.uniform(-5, 5, 5), probs=np.full(5, 0.2))
        second = DiscreteDistribution(atoms=rng.uniform(-5, 5, 5), probs=np.full(5, 0.2))
        mixed = mixture(first, second, 0.3)
        grid = np.linspace(-6.0, 6.0, 100)
        np.testing.assert_allclose(mixed.cdf(grid), 0.3 * first.cdf(grid) + 0.7 * second.cdf(grid), atol=1e-12)

    def test_continuous_mixture(self):
        first = PiecewiseLinearQuantileDistribution.uniform(0.0, 1.0)
        second = DiscreteDistribution.point_mass(0.5)
        mixed = mixture(first, second, 0.5)
        grid = np.linspace(-0.5, 1.5, 41)
        np.testing.assert_allclose(mixed.cdf(grid), 0.5 * first.cdf(grid) + 0.5 * second.cdf(grid), atol=1e-12)
        assert mixed.mean == pytest.approx(0.5)


class TestStopLoss:
    @pytest.mark.parametrize(("t", "expected"), [(0.0, 5.0), (10.0, 0.0), (4.0, 3.0), (-2.0, 7.0)])
    def test_two_atom_values(self, two_atom, t, expected):
        assert stop_loss(two_atom, t) == pytest.approx(expected)

    def test_uniform(self):
        uniform = PiecewiseLinearQuantileDistribution.uniform(0.0, 2.0)
        assert stop_loss(uniform, 1.0) == pytest.approx(0.25)

    @given(discrete_laws(), values)
    @settings(max_examples=100, deadline=None)
    def test_matches_atom_summation(self, dist, t):
        expected = math.fsum(p * max(a - t, 0.0) for a, p in zip(dist.atoms, dist.probs))
        assert stop_loss(dist, t) == pytest.approx(expected, abs=1e-12)


class TestIncreasingConvexOrder:
    def test_reflexive(self, two_atom):
        assert icx_dominates(two_atom, two_atom)

    def test_spread_dominates_its_mean(self, two_atom):
        assert icx_dominates(two_atom, DiscreteDistribution.point_mass(5.0))

    def test_mean_does_not_dominate_spread(self, two_atom):
        assert not icx_dominates(DiscreteDistribution.point_mass(5.0), two_atom)


class TestConditionalTailExpectation:
    def test_single_atom_tail(self, two_atom):
        assert conditional_tail_expectation(two_atom, 10.0) == pytest.approx(10.0)

    def test_tail_between_atoms(self, two_atom):
        assert conditional_tail_expectation(two_atom, 1.0) == pytest.approx(10.0)

    def test_null_event(self, two_atom):
        with pytest.raises(ZeroProbabilityEventError):
            conditional_tail_expectation(two_atom, 11.0)

    def test_piecewise_law(self):
        x, _ = a1_laws(0.1)
        assert conditional_tail_expectation(x, 1.0) == pytest.approx(2.045, abs=1e-9)


class TestTransforms:
    @given(laws, values)
    @settings(max_examples=50, deadline=None)
    def test_shift_moves_quantiles(self, dist, m):
        shifted = dist.shift(m)
        assert shifted.mean == pytest.approx(dist.mean + m, abs=1e-9)
        assert shifted.var_left(0.5) == pytest.approx(dist.var_left(0.5) + m, abs=1e-9)

    def test_scale(self, two_atom):
        assert two_atom.scale(2.0).ess_sup == 20.0
        with pytest.raises(InvalidInputError):
            two_atom.scale(-1.0)


class TestRandomVector:
    def test_combine_and_law(self):
        vector = RandomVector(probs=(0.25, 0.25, 0.5), variables={"X": (1.0, 2.0, 3.0), "Y": (0.0, 1.0, -1.0)})
        vector = vector.combine("S", {"X": 1.0, "Y": 2.0}, constant=1.0)
        np.testing.assert_allclose(vector.values("S"), [2.0, 5.0, 2.0])
        law = vector.law("S")
        assert law.atoms == (2.0, 5.0)
        assert law.probs == pytest.approx((0.75, 0.25))

    def test_expectation_under_weights(self):
        vector = RandomVector(probs=(0.5, 0.5), variables={"X": (0.0, 4.0)})
        assert vector.expectation(vector.values("X")) == pytest.approx(2.0)
        assert vector.expectation(vector.values("X"), weights=[0.0, 1.0]) == pytest.approx(4.0)

    def test_wrong_length(self):
        with pytest.raises(InvalidInputError):
            RandomVector(probs=(0.5, 0.5), variables={"X": (1.0,)})
