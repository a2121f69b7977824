"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from src.config import settings
from src.optimization.ru_opt import ScenarioMatrix
from src.risk.dist import DiscreteDistribution
from src.risk.lambdas import StepLambda


@pytest.fixture
def two_atom() -> DiscreteDistribution:
    """Losses 0 and 10 with equal odds."""
    return DiscreteDistribution.from_mapping({0.0: 0.5, 10.0: 0.5})


@pytest.fixture
def demo_law() -> DiscreteDistribution:
    return DiscreteDistribution.from_mapping({0.0: 0.5, 2.0: 0.5})


@pytest.fixture
def demo_step() -> StepLambda:
    """Right-continuous step with levels 0.9, 0.5 and 0.2."""
    return StepLambda(breaks=(1.0, 1.5), values=(0.9, 0.5, 0.2), side="right")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_scenarios() -> ScenarioMatrix:
    return ScenarioMatrix.uniform([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])


@pytest.fixture
def ten_scenarios() -> ScenarioMatrix:
    """Three assets over ten equally likely scenarios."""
    rng = np.random.default_rng(7)
    return ScenarioMatrix.uniform(np.round(rng.uniform(-2.0, 3.0, (10, 3)), 3).tolist())


@pytest.fixture
def fast_settings(monkeypatch):
    """Shrink the trial counts of the harness."""
    monkeypatch.setattr(settings, "property_trials", 20)
    monkeypatch.setattr(settings, "quasi_convexity_trials", 20)
    monkeypatch.setattr(settings, "equivalence_trials", 10)
    monkeypatch.setattr(settings, "dual_trials", 20)
    monkeypatch.setattr(settings, "control_trials", 50)
    monkeypatch.setattr(settings, "l1_sequence_length", 4)
    monkeypatch.setattr(settings, "a1_grid_points", 20001)
    return settings
