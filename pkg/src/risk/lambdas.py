"""Decreasing level functions Lambda: R -> [0, 1].

Four closed-form variants are supported so that point values, one-sided limits,
integrals and level sets are exact. Specs are parsed from JSON objects tagged by
``type``; unknown keys are rejected.
"""

import bisect
import logging
import math
from abc import ABC, abstractmethod
from typing import Annotated, Any, Literal, NamedTuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from src.config import settings
from src.errors import InvalidInputError, PreconditionError
from src.utils import is_midpoint_convex

logger = logging.getLogger(__name__)

CellKind = Literal["constant", "affine", "smooth"]


class LambdaCell(NamedTuple):
    """Open interval (lo, hi) on which Lambda is constant, affine or smooth."""

    lo: float
    hi: float
    kind: CellKind


class BaseLambda(BaseModel, ABC):
    """Common interface of the Lambda variants."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    @abstractmethod
    def eval(self, x: float) -> float:
        """Lambda(x)."""

    def __call__(self, x: float) -> float:
        return self.eval(x)

    def left_limit(self, x: float) -> float:
        """Lambda(x-)."""
        return self.eval(x)

    def right_limit(self, x: float) -> float:
        """Lambda(x+)."""
        return self.eval(x)

    def is_right_continuous(self) -> bool:
        return True

    def is_left_continuous(self) -> bool:
        return True

    @property
    def is_constant(self) -> bool:
        return self.limit_at_neg_inf == self.limit_at_pos_inf

    @property
    @abstractmethod
    def limit_at_neg_inf(self) -> float:
        """Lambda(-inf), also the supremum of Lambda."""

    @property
    @abstractmethod
    def limit_at_pos_inf(self) -> float:
        """Lambda(+inf), also the infimum of Lambda."""

    def breakpoints(self) -> tuple[float, ...]:
        """Points where Lambda jumps or changes its closed form."""
        return ()

    def cells(self) -> list[LambdaCell]:
        """Consecutive open cells between breakpoints, covering the real line."""
        edges = [-math.inf, *self.breakpoints(), math.inf]
        return [
            LambdaCell(lo, hi, self._cell_kind(lo, hi)) for lo, hi in zip(edges[:-1], edges[1:])
        ]

    def _cell_kind(self, lo: float, hi: float) -> CellKind:
        return "constant"

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised evaluation."""
        return np.array([self.eval(float(x)) for x in np.asarray(xs, dtype=float).ravel()])

    def one_sided_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised (Lambda(x-), Lambda(x+))."""
        values = self.evaluate_many(xs)
        return values, values

    @abstractmethod
    def integral(self, lo: float, hi: float) -> float:
        """Integral of Lambda over [lo, hi] (negated when hi < lo)."""

    @abstractmethod
    def sup_level_set(self, tau: float) -> float:
        """sup{x : Lambda(x) >= tau}, with sup of the empty set = -inf."""

    @abstractmethod
    def _probe_span(self) -> tuple[float, float]:
        """Finite range containing every feature of Lambda."""

    def default_probe_grid(self, points: int | None = None) -> np.ndarray:
        """Uniform grid over the range where Lambda changes."""
        lo, hi = self._probe_span()
        return np.linspace(lo, hi, points or settings.probe_grid_points)


class ConstantLambda(BaseLambda):
    type: Literal["constant"] = "constant"
    alpha: float = Field(ge=0.0, le=1.0)

    def eval(self, x: float) -> float:
        return self.alpha

    @property
    def limit_at_neg_inf(self) -> float:
        return self.alpha

    @property
    def limit_at_pos_inf(self) -> float:
        return self.alpha

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(xs).shape, self.alpha, dtype=float)

    def integral(self, lo: float, hi: float) -> float:
        return self.alpha * (hi - lo)

    def sup_level_set(self, tau: float) -> float:
        return math.inf if tau <= self.alpha else -math.inf

    def _probe_span(self) -> tuple[float, float]:
        return -1.0, 1.0


class StepLambda(BaseLambda):
    """
    Piecewise-constant Lambda.

    ``values[0]`` holds left of ``breaks[0]``, ``values[i]`` between
    ``breaks[i-1]`` and ``breaks[i]``, and ``values[-1]`` right of the last
    break. ``side`` selects which one-sided limit Lambda takes at a break.
    """

    type: Literal["step"] = "step"
    breaks: tuple[float, ...]
    values: tuple[float, ...]
    side: Literal["left", "right"] = "right"

    @model_validator(mode="after")
    def _check_steps(self) -> "StepLambda":
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("a step Lambda needs exactly one more value than breaks")
        if not all(math.isfinite(b) for b in self.breaks):
            raise ValueError("breaks must be finite")
        if any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("values must lie in [0, 1]")
        if any(v < w for v, w in zip(self.values, self.values[1:])):
            raise ValueError("values must be weakly decreasing")
        return self

    @property
    def has_jump(self) -> bool:
        return any(v != w for v, w in zip(self.values, self.values[1:]))

    def eval(self, x: float) -> float:
        if self.side == "right":
            return self.values[bisect.bisect_right(self.breaks, x)]
        return self.values[bisect.bisect_left(self.breaks, x)]

    def left_limit(self, x: float) -> float:
        return self.values[bisect.bisect_left(self.breaks, x)]

    def right_limit(self, x: float) -> float:
        return self.values[bisect.bisect_right(self.breaks, x)]

    def is_right_continuous(self) -> bool:
        return self.side == "right" or not self.has_jump

    def is_left_continuous(self) -> bool:
        return self.side == "left" or not self.has_jump

    @property
    def limit_at_neg_inf(self) -> float:
        return self.values[0]

    @property
    def limit_at_pos_inf(self) -> float:
        return self.values[-1]

    def breakpoints(self) -> tuple[float, ...]:
        return self.breaks

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks, dtype=float), xs, side=self.side)
        return np.asarray(self.values, dtype=float)[idx]

    def one_sided_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        breaks = np.asarray(self.breaks, dtype=float)
        values = np.asarray(self.values, dtype=float)
        return (
            values[np.searchsorted(breaks, xs, side="left")],
            values[np.searchsorted(breaks, xs, side="right")],
        )

    def integral(self, lo: float, hi: float) -> float:
        if hi < lo:
            return -self.integral(hi, lo)
        edges = [lo, *(b for b in self.breaks if lo < b < hi), hi]
        return math.fsum(
            self.eval(0.5 * (a + b)) * (b - a) for a, b in zip(edges[:-1], edges[1:])
        )

    def sup_level_set(self, tau: float) -> float:
        if tau <= self.values[-1]:
            return math.inf
        last = max((i for i, v in enumerate(self.values) if v >= tau), default=None)
        return -math.inf if last is None else self.breaks[last]

    def _probe_span(self) -> tuple[float, float]:
        if not self.breaks:
            return -1.0, 1.0
        width = max(1.0, self.breaks[-1] - self.breaks[0])
        return self.breaks[0] - width, self.breaks[-1] + width


class LogisticLambda(BaseLambda):
    """Lambda(x) = 1 / (exp(a x) + 1)."""

    type: Literal["logistic"] = "logistic"
    a: float = Field(gt=0.0)

    def eval(self, x: float) -> float:
        return 0.5 * (1.0 - math.tanh(0.5 * self.a * x))

    @property
    def limit_at_neg_inf(self) -> float:
        return 1.0

    @property
    def limit_at_pos_inf(self) -> float:
        return 0.0

    def _cell_kind(self, lo: float, hi: float) -> CellKind:
        return "smooth"

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 - np.tanh(0.5 * self.a * np.asarray(xs, dtype=float)))

    def integral(self, lo: float, hi: float) -> float:
        # antiderivative -log(1 + exp(-a x)) / a
        return float(np.logaddexp(0.0, -self.a * lo) - np.logaddexp(0.0, -self.a * hi)) / self.a

    def sup_level_set(self, tau: float) -> float:
        if tau <= 0.0:
            return math.inf
        if tau >= 1.0:
            return -math.inf
        return math.log(1.0 / tau - 1.0) / self.a

    def _probe_span(self) -> tuple[float, float]:
        return -8.0 / self.a, 8.0 / self.a


class ClampedLinearLambda(BaseLambda):
    """Lambda(x) = min(cap, max(floor, intercept + slope x)) with slope < 0."""

    type: Literal["clamped_linear"] = "clamped_linear"
    slope: float = Field(lt=0.0)
    intercept: float
    floor: float = Field(ge=0.0, le=1.0)
    cap: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_clamp(self) -> "ClampedLinearLambda":
        if self.floor > self.cap:
            raise ValueError("floor must not exceed cap")
        return self

    @property
    def cap_kink(self) -> float:
        """Largest x with Lambda(x) = cap."""
        return (self.cap - self.intercept) / self.slope

    @property
    def floor_kink(self) -> float:
        """Smallest x with Lambda(x) = floor."""
        return (self.floor - self.intercept) / self.slope

    def eval(self, x: float) -> float:
        return min(self.cap, max(self.floor, self.intercept + self.slope * x))

    @property
    def limit_at_neg_inf(self) -> float:
        return self.cap

    @property
    def limit_at_pos_inf(self) -> float:
        return self.floor

    def breakpoints(self) -> tuple[float, ...]:
        if self.floor == self.cap:
            return ()
        return (self.cap_kink, self.floor_kink)

    def _cell_kind(self, lo: float, hi: float) -> CellKind:
        if self.floor < self.cap and lo == self.cap_kink and hi == self.floor_kink:
            return "affine"
        return "constant"

    def evaluate_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.clip(self.intercept + self.slope * xs, self.floor, self.cap)

    def integral(self, lo: float, hi: float) -> float:
        if hi < lo:
            return -self.integral(hi, lo)
        edges = [lo, *(b for b in self.breakpoints() if lo < b < hi), hi]
        return math.fsum(
            0.5 * (self.eval(a) + self.eval(b)) * (b - a) for a, b in zip(edges[:-1], edges[1:])
        )

    def sup_level_set(self, tau: float) -> float:
        if tau <= self.floor:
            return math.inf
        if tau > self.cap:
            return -math.inf
        return (tau - self.intercept) / self.slope

    def _probe_span(self) -> tuple[float, float]:
        if self.floor == self.cap:
            return -1.0, 1.0
        width = max(1.0, self.floor_kink - self.cap_kink)
        return self.cap_kink - width, self.floor_kink + width


LambdaSpec = Annotated[
    Union[ConstantLambda, StepLambda, LogisticLambda, ClampedLinearLambda],
    Field(discriminator="type"),
]

_lambda_adapter: TypeAdapter[LambdaSpec] = TypeAdapter(LambdaSpec)


def parse_lambda(data: dict[str, Any] | str | bytes) -> LambdaSpec:
    """
    Parse a Lambda spec from a JSON document or an already decoded object.

    Raises:
        InvalidInputError: unknown type, unknown keys or invalid parameters
    """
    try:
        if isinstance(data, (str, bytes)):
            return _lambda_adapter.validate_json(data)
        return _lambda_adapter.validate_python(data)
    except ValidationError as exc:
        raise InvalidInputError(f"invalid Lambda spec: {exc}") from exc


def eval_lambda(lam: BaseLambda, x: float) -> float:
    return lam.eval(x)


def eval_left_limit(lam: BaseLambda, x: float) -> float:
    return lam.left_limit(x)


def eval_right_limit(lam: BaseLambda, x: float) -> float:
    return lam.right_limit(x)


def is_right_continuous(lam: BaseLambda) -> bool:
    return lam.is_right_continuous()


def is_left_continuous(lam: BaseLambda) -> bool:
    return lam.is_left_continuous()


def inverse_gap_convexity_violation(
    lam: BaseLambda,
    probe_grid: np.ndarray | None = None,
) -> tuple[float, float] | None:
    """First grid pair (x, y) where x -> 1/(1 - Lambda(x)) breaks midpoint convexity."""
    grid = lam.default_probe_grid() if probe_grid is None else np.asarray(probe_grid, dtype=float)
    levels = lam.evaluate_many(grid)
    if np.any(levels >= 1.0):
        bad = float(grid[int(np.argmax(levels >= 1.0))])
        raise PreconditionError(f"Lambda equals 1 at probe point {bad}")
    _, pair = is_midpoint_convex(lambda x: 1.0 / (1.0 - lam.eval(x)), grid, tol=1e-10)
    return pair


def one_over_one_minus_convex(lam: BaseLambda, probe_grid: np.ndarray | None = None) -> bool:
    """
    Decide whether x -> 1/(1 - Lambda(x)) is convex.

    Constant specs are convex and step specs with a jump are not; the other
    variants are checked for midpoint convexity on ``probe_grid``.

    Raises:
        PreconditionError: Lambda equals 1 at a probe point
    """
    grid = lam.default_probe_grid() if probe_grid is None else np.asarray(probe_grid, dtype=float)
    if np.any(lam.evaluate_many(grid) >= 1.0):
        raise PreconditionError("Lambda must stay below 1 on the probe grid")
    if isinstance(lam, ConstantLambda):
        return True
    if isinstance(lam, StepLambda):
        return not lam.has_jump
    verdict = inverse_gap_convexity_violation(lam, grid) is None
    logger.debug("1/(1-Lambda) convexity of %s on %d points: %s", lam.type, len(grid), verdict)
    return verdict
