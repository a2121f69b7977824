"""Loss distributions with exact quantile, cdf, tail and stochastic-order primitives.

Every law is stored through its left-quantile function on [0, 1] as a list of
pieces ``(u0, u1, v0, v1)``: on ``(u0, u1)`` the quantile runs linearly from
``v0`` to ``v1``. Atoms are flat pieces. All primitives below are exact for
this representation.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.config import settings
from src.errors import InvalidInputError, ZeroProbabilityEventError

logger = logging.getLogger(__name__)


def validate_level(alpha: float) -> float:
    """Return ``alpha`` as a float after checking 0 <= alpha <= 1."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"level must lie in [0, 1], got {alpha}")
    return alpha


class Distribution(BaseModel, ABC):
    """Law of a bounded loss, represented by its piecewise-linear left quantile."""

    model_config = ConfigDict(frozen=True)

    _u0: np.ndarray = PrivateAttr()
    _u1: np.ndarray = PrivateAttr()
    _v0: np.ndarray = PrivateAttr()
    _v1: np.ndarray = PrivateAttr()
    _tail: np.ndarray = PrivateAttr()

    @abstractmethod
    def _quantile_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return the arrays (u0, u1, v0, v1) describing the quantile function."""

    @abstractmethod
    def shift(self, m: float) -> "Distribution":
        """Law of X + m."""

    @abstractmethod
    def scale(self, c: float) -> "Distribution":
        """Law of c X for c >= 0."""

    def model_post_init(self, __context: Any) -> None:
        u0, u1, v0, v1 = self._quantile_pieces()
        self._u0, self._u1, self._v0, self._v1 = u0, u1, v0, v1
        areas = (u1 - u0) * 0.5 * (v0 + v1)
        # _tail[i] = integral of the quantile over pieces i, i+1, ...
        self._tail = np.concatenate([np.cumsum(areas[::-1])[::-1], [0.0]])

    # Support and moments

    @property
    def mean(self) -> float:
        return float(self._tail[0])

    @property
    def ess_inf(self) -> float:
        return float(self._v0[0])

    @property
    def ess_sup(self) -> float:
        return float(self._v1[-1])

    @property
    def is_degenerate(self) -> bool:
        return self.ess_inf == self.ess_sup

    def knots(self) -> np.ndarray:
        """Sorted values where the cdf jumps or changes slope."""
        return np.unique(np.concatenate([self._v0, self._v1]))

    def quantile_breaks(self) -> np.ndarray:
        """Sorted levels in [0, 1] where the quantile function changes piece."""
        return np.unique(np.concatenate([self._u0, self._u1]))

    # Distribution function

    def _cdf_from_index(self, idx: np.ndarray, xs: np.ndarray) -> np.ndarray:
        safe = np.clip(idx, 0, len(self._u0) - 1)
        u0, u1 = self._u0[safe], self._u1[safe]
        v0, v1 = self._v0[safe], self._v1[safe]
        sloped = v1 > v0
        span = np.where(sloped, v1 - v0, 1.0)
        frac = np.where(sloped, np.clip((xs - v0) / span, 0.0, 1.0), 1.0)
        return np.where(idx < 0, 0.0, u0 + (u1 - u0) * frac)

    def cdf(self, x: float | np.ndarray) -> float | np.ndarray:
        """P(X <= x), vectorised over ``x``."""
        xs = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._v0, xs, side="right") - 1
        out = self._cdf_from_index(idx, xs)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, x: float | np.ndarray) -> float | np.ndarray:
        """P(X < x), vectorised over ``x``."""
        xs = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._v0, xs, side="left") - 1
        out = self._cdf_from_index(idx, xs)
        return float(out) if out.ndim == 0 else out

    # Quantiles and tail integrals

    def _interpolate(self, i: int, alpha: float) -> float:
        u0, u1 = self._u0[i], self._u1[i]
        v0, v1 = self._v0[i], self._v1[i]
        if v1 == v0:
            return float(v0)
        return float(v0 + (v1 - v0) * (alpha - u0) / (u1 - u0))

    def var_left(self, alpha: float) -> float:
        """Left quantile inf{x : P(X <= x) >= alpha}."""
        alpha = validate_level(alpha)
        if alpha == 0.0:
            return -math.inf
        i = min(int(np.searchsorted(self._u1, alpha, side="left")), len(self._u1) - 1)
        return self._interpolate(i, alpha)

    def var_right(self, alpha: float) -> float:
        """Right quantile inf{x : P(X <= x) > alpha}."""
        alpha = validate_level(alpha)
        if alpha == 1.0:
            return math.inf
        i = min(int(np.searchsorted(self._u1, alpha, side="right")), len(self._u1) - 1)
        return self._interpolate(i, max(alpha, float(self._u0[i])))

    def tail_integral(self, alpha: float) -> float:
        """Integral of the left quantile over [alpha, 1]."""
        alpha = validate_level(alpha)
        if alpha == 0.0:
            return self.mean
        if alpha == 1.0:
            return 0.0
        i = min(int(np.searchsorted(self._u1, alpha, side="right")), len(self._u1) - 1)
        start = max(alpha, float(self._u0[i]))
        q_start = self._interpolate(i, start)
        partial = (float(self._u1[i]) - start) * 0.5 * (q_start + float(self._v1[i]))
        return partial + float(self._tail[i + 1])

    def stop_loss(self, t: float) -> float:
        """E[(X - t)+]."""
        u0, u1, v0, v1 = self._u0, self._u1, self._v0, self._v1
        lengths = u1 - u0
        above = v0 >= t
        crossing = (v0 < t) & (v1 > t)
        span = np.where(crossing, v1 - v0, 1.0)
        full = np.where(above, lengths * (0.5 * (v0 + v1) - t), 0.0)
        part = np.where(crossing, lengths * (v1 - t) ** 2 / (2.0 * span), 0.0)
        return float(np.sum(full) + np.sum(part))

    def conditional_tail_expectation(self, t: float) -> float:
        """E[X | X >= t]."""
        mass = 1.0 - self.cdf_left(t)
        if mass <= 0.0:
            raise ZeroProbabilityEventError(f"P(X >= {t}) = 0")
        u0, u1, v0, v1 = self._u0, self._u1, self._v0, self._v1
        lengths = u1 - u0
        above = v0 >= t
        crossing = (v0 < t) & (v1 > t)
        span = np.where(crossing, v1 - v0, 1.0)
        full = np.where(above, lengths * 0.5 * (v0 + v1), 0.0)
        frac = np.where(crossing, (v1 - t) / span, 0.0)
        part = lengths * frac * 0.5 * (t + v1)
        return float((np.sum(full) + np.sum(part)) / mass)


class DiscreteDistribution(Distribution):
    """Finitely supported law: strictly increasing atoms with positive masses."""

    atoms: tuple[float, ...]
    probs: tuple[float, ...]

    @model_validator(mode="before")
    @classmethod
    def _sort_and_merge(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        atoms = np.asarray(data.get("atoms", ()), dtype=float).ravel()
        probs = np.asarray(data.get("probs", ()), dtype=float).ravel()
        if atoms.size == 0 or atoms.size != probs.size:
            raise InvalidInputError("atoms and probs must be non-empty and of equal length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(probs))):
            raise InvalidInputError("atoms and probs must be finite")
        if np.any(probs <= 0):
            raise InvalidInputError("every probability must be positive")
        total = float(math.fsum(probs))
        if abs(total - 1.0) > settings.prob_tolerance:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        order = np.argsort(atoms, kind="stable")
        atoms, probs = atoms[order], probs[order] / total
        starts = np.concatenate([[True], np.diff(atoms) > settings.merge_tolerance])
        groups = np.cumsum(starts) - 1
        merged = np.bincount(groups, weights=probs)
        return {"atoms": tuple(atoms[starts].tolist()), "probs": tuple(merged.tolist())}

    @classmethod
    def from_mapping(cls, masses: Mapping[float, float]) -> "DiscreteDistribution":
        """Build from ``{value: probability}``."""
        return cls(atoms=list(masses.keys()), probs=list(masses.values()))

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls(atoms=[value], probs=[1.0])

    def _quantile_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        atoms = np.asarray(self.atoms, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        cum[-1] = 1.0
        return cum[:-1], cum[1:], atoms, atoms.copy()

    def shift(self, m: float) -> "DiscreteDistribution":
        return DiscreteDistribution(atoms=[a + m for a in self.atoms], probs=self.probs)

    def scale(self, c: float) -> "DiscreteDistribution":
        if c < 0:
            raise InvalidInputError("scale factor must be nonnegative")
        return DiscreteDistribution(atoms=[c * a for a in self.atoms], probs=self.probs)


class PiecewiseLinearQuantileDistribution(Distribution):
    """Law whose left quantile is piecewise linear on a partition of [0, 1].

    Each segment is ``(u_start, u_end, value_start, value_end)``; a segment with
    equal values is an atom and a gap between consecutive segments is a jump.
    """

    segments: tuple[tuple[float, float, float, float], ...]

    @model_validator(mode="before")
    @classmethod
    def _check_partition(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        raw = np.asarray(data.get("segments", ()), dtype=float)
        if raw.ndim != 2 or raw.shape[0] == 0 or raw.shape[1] != 4:
            raise InvalidInputError("segments must be a non-empty list of 4-tuples")
        if not np.all(np.isfinite(raw)):
            raise InvalidInputError("segment values must be finite")
        u0, u1, v0, v1 = raw.T.copy()
        tol = settings.prob_tolerance
        if abs(u0[0]) > tol or abs(u1[-1] - 1.0) > tol:
            raise InvalidInputError("segments must start at 0 and end at 1")
        if np.any(np.abs(u0[1:] - u1[:-1]) > tol):
            raise InvalidInputError("segments must be contiguous")
        if np.any(u1 <= u0):
            raise InvalidInputError("segments must have positive length")
        if np.any(v1 < v0) or np.any(v0[1:] < v1[:-1] - settings.merge_tolerance):
            raise InvalidInputError("quantile function must be nondecreasing")
        u0[0], u1[-1] = 0.0, 1.0
        u0[1:] = u1[:-1]
        v0[1:] = np.maximum(v0[1:], v1[:-1])
        v1 = np.maximum(v1, v0)
        return {"segments": tuple(zip(u0.tolist(), u1.tolist(), v0.tolist(), v1.tolist()))}

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PiecewiseLinearQuantileDistribution":
        """Uniform law on [lo, hi]."""
        return cls(segments=[(0.0, 1.0, lo, hi)])

    def _quantile_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        raw = np.asarray(self.segments, dtype=float)
        return raw[:, 0].copy(), raw[:, 1].copy(), raw[:, 2].copy(), raw[:, 3].copy()

    def shift(self, m: float) -> "PiecewiseLinearQuantileDistribution":
        return PiecewiseLinearQuantileDistribution(
            segments=[(a, b, v + m, w + m) for a, b, v, w in self.segments]
        )

    def scale(self, c: float) -> "PiecewiseLinearQuantileDistribution":
        if c < 0:
            raise InvalidInputError("scale factor must be nonnegative")
        return PiecewiseLinearQuantileDistribution(
            segments=[(a, b, c * v, c * w) for a, b, v, w in self.segments]
        )


def law_of(values: Sequence[float], probs: Sequence[float]) -> DiscreteDistribution:
    """Law of a variable taking ``values[j]`` with probability ``probs[j]``."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    return DiscreteDistribution(atoms=values[keep], probs=probs[keep])


def _from_cdf_knots(
    knots: np.ndarray,
    cdf_right: np.ndarray,
    cdf_left: np.ndarray,
) -> Distribution:
    """Rebuild a law from its cdf, affine between consecutive knots."""
    segments: list[tuple[float, float, float, float]] = []
    for k, x in enumerate(knots):
        if cdf_right[k] > cdf_left[k]:
            segments.append((cdf_left[k], cdf_right[k], x, x))
        if k + 1 < len(knots) and cdf_left[k + 1] > cdf_right[k]:
            segments.append((cdf_right[k], cdf_left[k + 1], x, knots[k + 1]))
    if all(v == w for _, _, v, w in segments):
        return DiscreteDistribution(
            atoms=[v for _, _, v, _ in segments],
            probs=[b - a for a, b, _, _ in segments],
        )
    return PiecewiseLinearQuantileDistribution(segments=segments)


def cdf(dist: Distribution, x: float) -> float:
    """P(X <= x)."""
    return dist.cdf(x)


def mixture(f: Distribution, g: Distribution, gamma: float) -> Distribution:
    """
    Mixture gamma F + (1 - gamma) G of two laws.

    Args:
        f: First law
        g: Second law
        gamma: Weight of ``f``

    Returns:
        The mixed law; discrete when both inputs are discrete
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"mixture weight must lie in [0, 1], got {gamma}")
    if gamma == 1.0:
        return f
    if gamma == 0.0:
        return g
    if isinstance(f, DiscreteDistribution) and isinstance(g, DiscreteDistribution):
        return DiscreteDistribution(
            atoms=f.atoms + g.atoms,
            probs=[gamma * p for p in f.probs] + [(1.0 - gamma) * q for q in g.probs],
        )
    knots = np.union1d(f.knots(), g.knots())
    right = gamma * f.cdf(knots) + (1.0 - gamma) * g.cdf(knots)
    left = gamma * f.cdf_left(knots) + (1.0 - gamma) * g.cdf_left(knots)
    right[-1] = 1.0
    return _from_cdf_knots(knots, right, left)


def stop_loss(dist: Distribution, t: float) -> float:
    """E[(X - t)+]."""
    return dist.stop_loss(t)


def icx_dominates(x: Distribution, y: Distribution, tol: float = 1e-12) -> bool:
    """
    Increasing convex order test: E[(X-t)+] >= E[(Y-t)+] for every t.

    The stop-loss functions change slope only at the knots of the two laws, so
    comparing them on the merged knot set decides the order.
    """
    for t in np.union1d(x.knots(), y.knots()):
        if x.stop_loss(float(t)) < y.stop_loss(float(t)) - tol:
            return False
    return True


def conditional_tail_expectation(dist: Distribution, t: float) -> float:
    """E[X | X >= t]."""
    return dist.conditional_tail_expectation(t)


class RandomVector(BaseModel):
    """Jointly defined variables on a finite sample space."""

    model_config = ConfigDict(frozen=True)

    probs: tuple[float, ...]
    variables: dict[str, tuple[float, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_shapes(self) -> "RandomVector":
        if not self.probs or any(p <= 0 for p in self.probs):
            raise InvalidInputError("sample probabilities must be positive")
        if abs(math.fsum(self.probs) - 1.0) > settings.prob_tolerance:
            raise InvalidInputError("sample probabilities must sum to 1")
        for name, values in self.variables.items():
            if len(values) != len(self.probs):
                raise InvalidInputError(f"variable {name!r} has the wrong length")
        return self

    @property
    def size(self) -> int:
        return len(self.probs)

    def values(self, name: str) -> np.ndarray:
        return np.asarray(self.variables[name], dtype=float)

    def law(self, name: str) -> DiscreteDistribution:
        """Law of a named variable."""
        return law_of(self.variables[name], self.probs)

    def law_of(self, values: Sequence[float]) -> DiscreteDistribution:
        """Law of an ad-hoc variable defined on the same sample points."""
        return law_of(values, self.probs)

    def expectation(self, values: Sequence[float], weights: Sequence[float] | None = None) -> float:
        """Expectation of ``values`` under the base probabilities or ``weights``."""
        w = np.asarray(self.probs if weights is None else weights, dtype=float)
        return float(np.dot(w, np.asarray(values, dtype=float)))

    def with_variable(self, name: str, values: Sequence[float]) -> "RandomVector":
        variables = dict(self.variables)
        variables[name] = tuple(float(v) for v in values)
        return RandomVector(probs=self.probs, variables=variables)

    def combine(
        self,
        name: str,
        coefficients: Mapping[str, float],
        constant: float = 0.0,
    ) -> "RandomVector":
        """Add ``name = constant + sum(c * variable)`` to the vector."""
        total = np.full(self.size, constant, dtype=float)
        for var, coef in coefficients.items():
            total = total + coef * self.values(var)
        return self.with_variable(name, total)
