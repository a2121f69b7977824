"""Dual representation of Lambda-ES on a finite sample space.

For a measure change Q the dual function is

    R(t, Q) = min(t, sup{x : Lambda(x) >= 1 - c}),   c = min_{q_j > 0} p_j / q_j,

and Lambda-ES is the supremum of R(E_Q[X], Q) over all Q.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.config import settings
from src.errors import ContinuityError, InvalidInputError
from src.risk.dist import RandomVector
from src.risk.lambdas import BaseLambda
from src.risk.measures import lambda_es

logger = logging.getLogger(__name__)


class MeasureChange(BaseModel):
    """Base probabilities p and an alternative measure q on the same sample points."""

    model_config = ConfigDict(frozen=True)

    base_probs: tuple[float, ...]
    alt_probs: tuple[float, ...]

    @model_validator(mode="after")
    def _check_measures(self) -> "MeasureChange":
        if len(self.base_probs) != len(self.alt_probs) or not self.base_probs:
            raise InvalidInputError("base and alternative measures need the same non-empty support")
        if any(p <= 0 for p in self.base_probs) or any(q < 0 for q in self.alt_probs):
            raise InvalidInputError("base probabilities must be positive and alternative ones nonnegative")
        for name, probs in (("base", self.base_probs), ("alternative", self.alt_probs)):
            if abs(math.fsum(probs) - 1.0) > settings.prob_tolerance:
                raise InvalidInputError(f"{name} probabilities must sum to 1")
        return self

    @classmethod
    def identity(cls, probs: Sequence[float]) -> "MeasureChange":
        """Q = P."""
        return cls(base_probs=tuple(probs), alt_probs=tuple(probs))

    def density(self) -> np.ndarray:
        """dQ/dP at each sample point."""
        return np.asarray(self.alt_probs) / np.asarray(self.base_probs)

    def min_inverse_density(self) -> float:
        """Q-essential infimum of dP/dQ."""
        p = np.asarray(self.base_probs)
        q = np.asarray(self.alt_probs)
        mask = q > 0
        return float(np.min(p[mask] / q[mask]))

    def expectation(self, values: Sequence[float]) -> float:
        return float(np.dot(np.asarray(self.alt_probs), np.asarray(values, dtype=float)))


class DualBound(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


class RPropertiesReport(BaseModel):
    """Grid verdicts on the dual function R(., Q)."""

    nondecreasing: bool
    lipschitz: bool
    unbounded_below: bool
    continuous_in_t: bool
    first_violation: float | None = None

    @property
    def ok(self) -> bool:
        return self.nondecreasing and self.lipschitz and self.unbounded_below and self.continuous_in_t


def r_function(t: float, q: MeasureChange, lam: BaseLambda) -> float:
    """R(t, Q) = min(t, sup{x : Lambda(x) >= 1 - min p/q})."""
    tau = 1.0 - q.min_inverse_density()
    if tau <= 0.0:
        upper = math.inf
    else:
        upper = lam.sup_level_set(tau - settings.level_tolerance)
    return min(t, upper)


def witness_supremum(vector: RandomVector, lam: BaseLambda, variable: str = "X") -> MeasureChange:
    """
    Measure change attaining sup_Q R(E_Q[X], Q) = Lambda-ES(X).

    With x* the Lambda-ES crossing and level = Lambda(x*), the density is
    capped at 1 / (1 - level) and filled from the largest outcomes down.

    Raises:
        ContinuityError: Lambda is not left-continuous
    """
    if not lam.is_left_continuous():
        raise ContinuityError("the dual supremum is attained only for left-continuous Lambda")
    values = vector.values(variable)
    probs = np.asarray(vector.probs)
    x_star, _ = lambda_es(vector.law(variable), lam)
    level = lam.eval(x_star)

    alt = np.zeros_like(probs)
    if level >= 1.0:
        top = values == values.max()
        alt[top] = probs[top] / probs[top].sum()
    else:
        remaining = 1.0
        for j in np.argsort(-values, kind="stable"):
            if remaining <= 0.0:
                break
            alt[j] = min(probs[j] / (1.0 - level), remaining)
            remaining -= alt[j]
    logger.debug("Dual witness at x* = %.17g, level %.17g", x_star, level)
    return MeasureChange(base_probs=vector.probs, alt_probs=tuple(alt.tolist()))


def dual_lower_bound_check(
    vector: RandomVector,
    lam: BaseLambda,
    q: MeasureChange,
    variable: str = "X",
) -> DualBound:
    """Compare R(E_Q[X], Q) with Lambda-ES(X)."""
    lhs = r_function(q.expectation(vector.values(variable)), q, lam)
    rhs, _ = lambda_es(vector.law(variable), lam)
    ok = lhs <= rhs + settings.measure_tolerance * max(1.0, abs(rhs))
    return DualBound(lhs, rhs, bool(ok))


def r_properties_check(
    q: MeasureChange,
    lam: BaseLambda,
    t_grid: Sequence[float],
    tol: float = 1e-12,
) -> RPropertiesReport:
    """
    Check R(., Q) on a grid: nondecreasing, R(t1) - R(t2) <= t1 - t2 for
    t1 >= t2, unbounded below, and continuous in t.
    """
    ts = np.sort(np.asarray(t_grid, dtype=float))
    rs = np.array([r_function(float(t), q, lam) for t in ts])
    first_violation: float | None = None

    nondecreasing = True
    lipschitz = True
    for i in range(1, len(ts)):
        if rs[i] < rs[i - 1] - tol:
            nondecreasing = False
            first_violation = first_violation if first_violation is not None else float(ts[i])
        if rs[i] - rs[i - 1] > ts[i] - ts[i - 1] + tol:
            lipschitz = False
            first_violation = first_violation if first_violation is not None else float(ts[i])

    unbounded_below = r_function(-math.inf, q, lam) == -math.inf and bool(
        len(ts) == 0 or rs[0] <= ts[0]
    )

    continuous = True
    for t, r in zip(ts, rs):
        delta = 1e-9 * max(1.0, abs(t))
        for side in (-delta, delta):
            if abs(r_function(float(t + side), q, lam) - r) > delta + tol:
                continuous = False
                first_violation = first_violation if first_violation is not None else float(t)

    return RPropertiesReport(
        nondecreasing=nondecreasing,
        lipschitz=lipschitz,
        unbounded_below=unbounded_below,
        continuous_in_t=continuous,
        first_violation=first_violation,
    )
