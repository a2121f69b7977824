"""VaR, ES and their Lambda-indexed counterparts.

Two families of algorithms live here. The direct Lambda-VaR scan walks the
merged breakpoints of the distribution function and of Lambda. The crossing
routines ``sup_crossing`` / ``inf_crossing`` evaluate

    sup_x min(M(Lambda(x)), x)    and    inf_x max(M(Lambda(x)), x)

for any level-indexed measure M that is nondecreasing in the level, one
Lambda cell at a time. Lambda-ES is the crossing of ES; the bisection path is
kept separate so both can be checked against each other.
"""

import logging
import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.config import settings
from src.errors import PreconditionError
from src.risk.dist import DiscreteDistribution, Distribution, validate_level
from src.risk.lambdas import BaseLambda, LambdaCell
from src.utils import first_true, last_true

logger = logging.getLogger(__name__)

LevelMeasure = Callable[[float], float]


class EsRuResult(NamedTuple):
    """Minimum of the Rockafellar-Uryasev objective and its argmin interval."""

    value: float
    argmin_lo: float
    argmin_hi: float


class CrossingCertificate(BaseModel):
    """Witness of ES at Lambda(x*+) <= x* <= ES at Lambda(x*-)."""

    model_config = ConfigDict(frozen=True)

    x_star: float
    left_value: float
    right_value: float

    def holds(self, tol: float | None = None) -> bool:
        tol = settings.certificate_tolerance if tol is None else tol
        slack = tol * max(1.0, abs(self.x_star))
        return self.right_value <= self.x_star + slack and self.x_star <= self.left_value + slack


# Quantiles and Expected Shortfall


def var_left(dist: Distribution, alpha: float) -> float:
    """VaR_alpha: the left alpha-quantile."""
    return dist.var_left(alpha)


def var_right(dist: Distribution, alpha: float) -> float:
    """VaR+_alpha: the right alpha-quantile."""
    return dist.var_right(alpha)


def es(dist: Distribution, alpha: float) -> float:
    """Expected Shortfall at level alpha; ES_0 = E[X] and ES_1 = ess-sup."""
    alpha = validate_level(alpha)
    if alpha == 1.0:
        return dist.ess_sup
    value = dist.tail_integral(alpha) / (1.0 - alpha)
    return min(max(value, dist.ess_inf), dist.ess_sup)


def es_ru(dist: Distribution, alpha: float) -> EsRuResult:
    """
    Minimise a + E[(X - a)+] / (1 - alpha) over a.

    The objective is convex and piecewise smooth between the knots of the law,
    so its minimum is attained at a knot or at the alpha-quantile.
    """
    alpha = validate_level(alpha)
    if alpha == 1.0:
        top = dist.ess_sup
        return EsRuResult(top, top, top)
    lo, hi = dist.var_left(alpha), dist.var_right(alpha)
    candidates = [float(a) for a in dist.knots()] + [hi]
    if math.isfinite(lo):
        candidates.append(lo)
    value = min(a + dist.stop_loss(a) / (1.0 - alpha) for a in candidates)
    return EsRuResult(value, lo, hi)


# Generic crossings


def _interior_point(cell: LambdaCell) -> float:
    if math.isinf(cell.lo) and math.isinf(cell.hi):
        return 0.0
    if math.isinf(cell.lo):
        return cell.hi - 1.0
    if math.isinf(cell.hi):
        return cell.lo + 1.0
    return 0.5 * (cell.lo + cell.hi)


def sup_crossing(measure: LevelMeasure, lam: BaseLambda, lo: float, hi: float) -> float:
    """
    sup_x min(M(Lambda(x)), x), equal to sup{x : M(Lambda(x)) >= x}.

    Args:
        measure: Level-indexed measure, nondecreasing in the level
        lam: Decreasing level function
        lo: Bracket end known to satisfy M(Lambda(lo)) >= lo
        hi: Bracket end known to violate it

    Returns:
        The crossing point
    """

    def holds(x: float) -> bool:
        return measure(lam.eval(x)) >= x

    candidates: list[float] = []
    for cell in lam.cells():
        if cell.kind == "constant":
            m = measure(lam.eval(_interior_point(cell)))
            if m > cell.lo:
                candidates.append(min(m, cell.hi))
            continue
        a, b = max(cell.lo, lo), min(cell.hi, hi)
        if a >= b:
            continue
        if holds(b):
            candidates.append(b)
        elif holds(a):
            candidates.append(last_true(holds, a, b))
    candidates.extend(b for b in lam.breakpoints() if holds(b))
    if not candidates:
        return measure(lam.limit_at_neg_inf)
    return max(candidates)


def inf_crossing(measure: LevelMeasure, lam: BaseLambda, lo: float, hi: float) -> float:
    """inf_x max(M(Lambda(x)), x), equal to inf{x : M(Lambda(x)) <= x}."""

    def holds(x: float) -> bool:
        return measure(lam.eval(x)) <= x

    candidates: list[float] = []
    for cell in lam.cells():
        if cell.kind == "constant":
            m = measure(lam.eval(_interior_point(cell)))
            if m < cell.hi:
                candidates.append(max(m, cell.lo))
            continue
        a, b = max(cell.lo, lo), min(cell.hi, hi)
        if a >= b:
            continue
        if holds(a):
            candidates.append(a)
        elif holds(b):
            candidates.append(first_true(holds, a, b))
    candidates.extend(b for b in lam.breakpoints() if holds(b))
    if not candidates:
        return measure(lam.limit_at_pos_inf)
    return min(candidates)


# Lambda-VaR


def _var_bracket(dist: Distribution) -> tuple[float, float]:
    return dist.ess_inf - 1.0, dist.ess_sup + 1.0


def _es_bracket(dist: Distribution) -> tuple[float, float]:
    return dist.mean - 1.0, dist.ess_sup + 1.0


def _affine_root(lo: float, hi: float, phi_lo: float, phi_hi: float) -> float:
    return lo + (-phi_lo) / (phi_hi - phi_lo) * (hi - lo)


def lambda_var(dist: Distribution, lam: BaseLambda, upper: bool = False) -> float:
    """
    Lambda-VaR inf{x : P(X <= x) >= Lambda(x)}, or Lambda-VaR+ with strict
    inequality when ``upper`` is set.

    phi = F - Lambda is nondecreasing, so the scan stops at the first knot or
    open cell where the inequality starts to hold. Inside a cell F and Lambda
    are continuous: an affine phi is solved in closed form, a smooth one by
    bisection.
    """
    if lam.is_constant:
        level = lam.limit_at_pos_inf
        return dist.var_right(level) if upper else dist.var_left(level)

    def passes(phi: np.ndarray | float) -> np.ndarray | bool:
        return phi > 0.0 if upper else phi >= 0.0

    points = np.union1d(dist.knots(), np.asarray(lam.breakpoints(), dtype=float))
    cdf_at = np.asarray(dist.cdf(points))
    cdf_before = np.asarray(dist.cdf_left(points))
    lam_left, lam_right = lam.one_sided_many(points)

    point_phi = cdf_at - np.asarray(lam.evaluate_many(points))
    # Cell k is (points[k-1], points[k]); cell 0 and cell n are unbounded.
    cell_lo = np.concatenate([[-math.inf], points])
    cell_hi = np.concatenate([points, [math.inf]])
    phi_after = np.concatenate([[-lam.limit_at_neg_inf], cdf_at - lam_right])
    phi_before = np.concatenate([cdf_before - lam_left, [1.0 - lam.limit_at_pos_inf]])

    cell_pass = np.asarray(passes(phi_before))
    point_pass = np.asarray(passes(point_phi))
    first_cell = int(np.argmax(cell_pass)) if cell_pass.any() else None
    first_point = int(np.argmax(point_pass)) if point_pass.any() else None
    if first_cell is None and first_point is None:
        return math.inf
    # cells and points interleave as cell 0, point 0, cell 1, point 1, ...
    if first_point is not None and (first_cell is None or 2 * first_point + 1 < 2 * first_cell):
        return float(points[first_point])

    k = first_cell
    lo, hi = float(cell_lo[k]), float(cell_hi[k])
    if passes(phi_after[k]):
        return lo
    inside = _interior_point(LambdaCell(lo, hi, "constant"))
    kind = next((c.kind for c in lam.cells() if c.lo < inside < c.hi), "constant")
    if kind != "smooth" and math.isfinite(lo) and math.isfinite(hi):
        return _affine_root(lo, hi, float(phi_after[k]), float(phi_before[k]))

    def phi_passes(x: float) -> bool:
        return bool(passes(dist.cdf(x) - lam.eval(x)))

    if math.isinf(lo):
        lo = hi - 1.0
        while phi_passes(lo):
            lo = hi - 2.0 * (hi - lo)
    if math.isinf(hi):
        hi = lo + 1.0
        while not phi_passes(hi):
            hi = lo + 2.0 * (hi - lo)
    return first_true(phi_passes, lo, hi)


def lambda_var_right(dist: Distribution, lam: BaseLambda) -> float:
    """Lambda-VaR+ inf{x : P(X <= x) > Lambda(x)}."""
    return lambda_var(dist, lam, upper=True)


def lambda_var_sup_form(dist: Distribution, lam: BaseLambda, upper: bool = False) -> float:
    """sup_x min(VaR_{Lambda(x)}(X), x), or the VaR+ version."""
    measure = dist.var_right if upper else dist.var_left
    return sup_crossing(measure, lam, *_var_bracket(dist))


def lambda_var_inf_form(dist: Distribution, lam: BaseLambda, upper: bool = False) -> float:
    """inf_x max(VaR_{Lambda(x)}(X), x), or the VaR+ version."""
    measure = dist.var_right if upper else dist.var_left
    return inf_crossing(measure, lam, *_var_bracket(dist))


def lambda_var_score(a: float, y: float, lam: BaseLambda) -> float:
    """Scoring function (y - a)+ - int_a^y (1 - Lambda(t)) dt, consistent for Lambda-VaR."""
    return max(y - a, 0.0) - (y - a) + lam.integral(a, y)


def expected_lambda_var_score(a: float, dist: DiscreteDistribution, lam: BaseLambda) -> float:
    """E[S(a, X)] for the Lambda-VaR scoring function."""
    return math.fsum(p * lambda_var_score(a, y, lam) for y, p in zip(dist.atoms, dist.probs))


# Lambda-ES


def lambda_es(dist: Distribution, lam: BaseLambda) -> tuple[float, CrossingCertificate]:
    """
    Lambda-ES sup_x min(ES_{Lambda(x)}(X), x) with its crossing certificate.

    Returns:
        The value x* and the one-sided ES values bracketing it
    """
    x_star = sup_crossing(lambda level: es(dist, level), lam, *_es_bracket(dist))
    certificate = CrossingCertificate(
        x_star=x_star,
        left_value=es(dist, lam.left_limit(x_star)),
        right_value=es(dist, lam.right_limit(x_star)),
    )
    logger.debug(
        "Lambda-ES crossing at %.17g (ES- %.17g, ES+ %.17g)",
        x_star,
        certificate.left_value,
        certificate.right_value,
    )
    return x_star, certificate


def lambda_es_inf_form(dist: Distribution, lam: BaseLambda) -> float:
    """inf_x max(ES_{Lambda(x)}(X), x)."""
    return inf_crossing(lambda level: es(dist, level), lam, *_es_bracket(dist))


def lambda_es_bisection(dist: Distribution, lam: BaseLambda, tol: float | None = None) -> float:
    """Root of the strictly decreasing h(x) = ES_{Lambda(x)}(X) - x by bisection."""
    lo, hi = _es_bracket(dist)
    tol = settings.bisection_tolerance if tol is None else tol
    return last_true(lambda x: es(dist, lam.eval(x)) >= x, lo, hi, tol=tol)


def lambda_es_is_finite(dist: Distribution, lam: BaseLambda) -> bool:
    """Lambda-ES is finite when the loss is bounded above or Lambda is not identically 1."""
    return math.isfinite(dist.ess_sup) or lam.limit_at_pos_inf < 1.0


def _quantiles_agree_above(first: Distribution, second: Distribution, alpha: float) -> bool:
    breaks = np.union1d(first.quantile_breaks(), second.quantile_breaks())
    breaks = breaks[(breaks > alpha) & (breaks < 1.0)]
    edges = np.concatenate([[alpha], breaks, [1.0]])
    probes_left = np.concatenate([breaks, 0.5 * (edges[:-1] + edges[1:]), [1.0]])
    tol = settings.prob_tolerance
    for u in probes_left:
        a, b = first.var_left(float(u)), second.var_left(float(u))
        if abs(a - b) > tol * max(1.0, abs(a)):
            return False
    for u in breaks:
        a, b = first.var_right(float(u)), second.var_right(float(u))
        if abs(a - b) > tol * max(1.0, abs(a)):
            return False
    return True


def is_tail_measure_invariant(
    dist: Distribution,
    lam: BaseLambda,
    alpha: float,
    lowered: Distribution,
) -> bool:
    """
    Whether Lambda-ES ignores a change of the quantiles on (0, alpha].

    Raises:
        PreconditionError: ``lowered`` differs from ``dist`` above level alpha
    """
    alpha = validate_level(alpha)
    if not _quantiles_agree_above(dist, lowered, alpha):
        raise PreconditionError(f"quantiles above level {alpha} must coincide")
    before, _ = lambda_es(dist, lam)
    after, _ = lambda_es(lowered, lam)
    return abs(before - after) <= 1e-12 * max(1.0, abs(before))
