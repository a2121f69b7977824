"""Reproductions of three rejected ways of indexing ES by a level function.

Each builder pins the free parameters of its construction, evaluates the
candidate measure with the library and compares against the closed forms.
The reports expect failures: the violated property is the point.
"""

import logging
from fractions import Fraction

import numpy as np

from src.config import settings
from src.risk.dist import (
    DiscreteDistribution,
    Distribution,
    PiecewiseLinearQuantileDistribution,
    conditional_tail_expectation,
)
from src.risk.lambdas import BaseLambda, ClampedLinearLambda, StepLambda
from src.risk.measures import es, expected_lambda_var_score, lambda_var, lambda_var_score
from src.verification.checks import PropertyReport

logger = logging.getLogger(__name__)


def _expect(mismatches: list[str], label: str, got: float, expected: float, tol: float) -> None:
    if abs(got - expected) > tol * max(1.0, abs(expected)):
        mismatches.append(f"{label} = {got!r}, expected {expected!r}")


# Conditional tail expectation above Lambda-VaR


def tail_expectation_candidate(dist: Distribution, lam: BaseLambda) -> float:
    """E[X | X >= Lambda-VaR(X)]."""
    return conditional_tail_expectation(dist, lambda_var(dist, lam))


def a1_laws(eps: float) -> tuple[PiecewiseLinearQuantileDistribution, PiecewiseLinearQuantileDistribution]:
    """
    X(w) = eps (w - 0.1) + 1{0.1 < w <= 0.9} + 10 * 1{w > 0.9} and
    Y(w) = eps (w - 1) + 10 * 1{w > 0.9} on the unit interval.

    Both are nondecreasing in w, so each is its own quantile function.
    """
    x = PiecewiseLinearQuantileDistribution(
        segments=[
            (0.0, 0.1, -0.1 * eps, 0.0),
            (0.1, 0.9, 1.0, 1.0 + 0.8 * eps),
            (0.9, 1.0, 10.0 + 0.8 * eps, 10.0 + 0.9 * eps),
        ]
    )
    y = PiecewiseLinearQuantileDistribution(
        segments=[
            (0.0, 0.9, -eps, -0.1 * eps),
            (0.9, 1.0, 10.0 - 0.1 * eps, 10.0),
        ]
    )
    return x, y


def _grid_law(dist: Distribution, points: int) -> DiscreteDistribution:
    omegas = (np.arange(points) + 0.5) / points
    values = np.array([dist.var_left(float(w)) for w in omegas])
    return DiscreteDistribution(atoms=values, probs=np.full(points, 1.0 / points))


def counterexample_a1(eps: float = 0.1, grid_points: int | None = None) -> PropertyReport:
    """X >= Y pointwise while the tail expectation above Lambda-VaR ranks Y higher."""
    grid_points = settings.a1_grid_points if grid_points is None else grid_points
    # strictly decreasing through Lambda(0) = 0.9 and Lambda(1) = 0.1
    lam = ClampedLinearLambda(slope=-0.8, intercept=0.9, floor=0.1, cap=1.0)
    x, y = a1_laws(eps)
    mismatches: list[str] = []

    var_x, var_y = lambda_var(x, lam), lambda_var(y, lam)
    rho_x, rho_y = tail_expectation_candidate(x, lam), tail_expectation_candidate(y, lam)
    _expect(mismatches, "Lambda-VaR(X)", var_x, 1.0, 1e-9)
    _expect(mismatches, "Lambda-VaR(Y)", var_y, 0.0, 1e-9)
    _expect(mismatches, "rho(X)", rho_x, 2.0 + 0.45 * eps, 1e-9)
    _expect(mismatches, "rho(Y)", rho_y, 10.0 - 0.05 * eps, 1e-9)

    omegas = np.linspace(0.0, 1.0, 1001)[1:]
    dominated = all(x.var_left(float(w)) >= y.var_left(float(w)) for w in omegas)
    if not dominated:
        mismatches.append("X >= Y fails on the probe grid")

    grid_rho_x = tail_expectation_candidate(_grid_law(x, grid_points), lam)
    grid_rho_y = tail_expectation_candidate(_grid_law(y, grid_points), lam)
    _expect(mismatches, "grid rho(X)", grid_rho_x, rho_x, 1e-3)
    _expect(mismatches, "grid rho(Y)", grid_rho_y, rho_y, 1e-3)

    violated = dominated and rho_x < rho_y
    return PropertyReport(
        name="counterexample_a1",
        trials=1,
        failures=int(violated),
        witness={"lambda": lam.model_dump(), "X": x.model_dump(), "Y": y.model_dump(),
                 "rho_X": rho_x, "rho_Y": rho_y},
        expect_failures=True,
        mismatches=mismatches,
        details={
            "eps": eps,
            "lambda_var_X": var_x,
            "lambda_var_Y": var_y,
            "grid_points": grid_points,
            "grid_rho_X": grid_rho_x,
            "grid_rho_Y": grid_rho_y,
        },
    )


# RU objective with the level taken at the threshold


def ru_threshold_candidate(dist: DiscreteDistribution, lam: StepLambda) -> tuple[float, float]:
    """
    inf over x of x + E[(X - x)+] / (1 - Lambda(x)) for a two-level step Lambda.

    Each regime is convex and piecewise linear in x, so its infimum sits at an
    atom inside the regime or at the closure point of the regime.

    Returns:
        The infimum and the regime-beta objective at the jump
    """
    (jump,) = lam.breaks

    def objective(x: float, level: float) -> float:
        return x + dist.stop_loss(x) / (1.0 - level)

    low_side, high_side = lam.values
    at_or_below = [a for a in dist.atoms if a <= jump] + [jump]
    above = [a for a in dist.atoms if a > jump] + [jump]
    below_value = min(objective(a, low_side) for a in at_or_below)
    above_value = min(objective(a, high_side) for a in above)
    return min(below_value, above_value), objective(jump, high_side)


def counterexample_a2(
    a0: float = 0.0,
    b0: float = -1.0,
    eps: float = 0.1,
    alpha: float = 0.9,
    beta: float = 0.8,
) -> PropertyReport:
    """
    Quasi-convexity of the threshold RU candidate, with Lambda_0 = alpha on
    x <= a0 and beta above.

    The reported midpoint value is the regime-beta objective at x = a0. The
    exact infimum over x > a0 is lower and is reported alongside.
    """
    if not (b0 < a0 and eps > 0 and 0.75 < beta < alpha < 1.0):
        raise ValueError("need b0 < a0, eps > 0 and 3/4 < beta < alpha < 1")
    lam = StepLambda(breaks=(a0,), values=(alpha, beta), side="left")
    z = DiscreteDistribution(atoms=[b0, a0 - eps], probs=[0.25, 0.75])
    y = DiscreteDistribution.point_mass(a0 + 3.0 * eps)
    w = DiscreteDistribution(atoms=[0.5 * (b0 + a0 + 3.0 * eps), a0 + eps], probs=[0.25, 0.75])
    mismatches: list[str] = []

    rho_z, _ = ru_threshold_candidate(z, lam)
    rho_y, _ = ru_threshold_candidate(y, lam)
    exact_w, displayed_w = ru_threshold_candidate(w, lam)
    _expect(mismatches, "rho(Z)", rho_z, a0 - eps, 1e-12)
    _expect(mismatches, "ES_alpha(Z)", es(z, alpha), a0 - eps, 1e-12)
    _expect(mismatches, "rho(Y)", rho_y, a0 + 3.0 * eps, 1e-12)
    _expect(mismatches, "rho((Y+Z)/2) at the jump", displayed_w, a0 + 0.75 * eps / (1.0 - beta), 1e-12)

    margin = displayed_w - max(rho_y, rho_z)
    exact_margin = exact_w - max(rho_y, rho_z)
    if exact_margin <= 0:
        logger.warning(
            "Exact infimum %.17g at the midpoint stays below max(rho(Y), rho(Z)); "
            "only the value at the jump exceeds it",
            exact_w,
        )
    return PropertyReport(
        name="counterexample_a2",
        trials=1,
        failures=int(margin > 0),
        witness={"lambda": lam.model_dump(), "Y": y.model_dump(), "Z": z.model_dump(),
                 "midpoint": w.model_dump(), "values": [rho_y, rho_z, displayed_w]},
        expect_failures=True,
        mismatches=mismatches,
        details={
            "parameters": {"a0": a0, "b0": b0, "eps": eps, "alpha": alpha, "beta": beta},
            "margin": margin,
            "exact_midpoint_infimum": exact_w,
            "exact_margin": exact_margin,
        },
    )


# Scoring-function candidate


def a3_coefficients(
    t0: Fraction, alphas: tuple[Fraction, Fraction, Fraction], c: Fraction
) -> dict[str, tuple[Fraction, Fraction]]:
    """(slope, intercept) of g(x) = c S(t0, x) + x on x < 0, 0 <= x < t0 and x >= t0."""
    a1, a2, a3 = alphas
    return {
        "negative": (1 - c * (1 - a3), c * (1 - a2) * t0),
        "middle": (1 - c * (1 - a2), c * (1 - a2) * t0),
        "upper": (1 + c * a1, -c * a1 * t0),
    }


def _g_exact(x: Fraction, t0: Fraction, coefficients: dict[str, tuple[Fraction, Fraction]]) -> Fraction:
    piece = "negative" if x < 0 else "middle" if x < t0 else "upper"
    slope, intercept = coefficients[piece]
    return slope * x + intercept


def counterexample_a3(
    x0: Fraction = Fraction(1),
    t0: Fraction = Fraction(2),
    y0: Fraction = Fraction(4),
    alphas: tuple[Fraction, Fraction, Fraction] = (Fraction(1, 5), Fraction(3, 5), Fraction(7, 10)),
    c_sweep: tuple[float, ...] = (1.0, 2.0, 3.0, 5.0, 10.0),
) -> PropertyReport:
    """
    The expected Lambda-VaR score plus the mean, at the smallest admissible
    c = 1 / (1 - alpha_3), ranks the midpoint of two equally distributed
    losses above both.
    """
    a1, a2, a3 = alphas
    if not (0 < x0 < t0 < y0 and a1 < Fraction(1, 4) and Fraction(1, 2) < a2 < a3 < 1):
        raise ValueError("need 0 < x0 < t0 < y0 and alpha_1 < 1/4 < 1/2 < alpha_2 < alpha_3 < 1")
    c = 1 / (1 - a3)
    lam = StepLambda(breaks=(0.0, float(t0)), values=(float(a3), float(a2), float(a1)), side="right")
    mismatches: list[str] = []

    coefficients = a3_coefficients(t0, alphas, c)
    probes = {"negative": (-3.0, -1.0), "middle": (0.25, 1.5), "upper": (2.5, 6.0)}
    for piece, (u, v) in probes.items():
        gu = float(c) * lambda_var_score(float(t0), u, lam) + u
        gv = float(c) * lambda_var_score(float(t0), v, lam) + v
        slope = (gv - gu) / (v - u)
        expected_slope, expected_intercept = coefficients[piece]
        _expect(mismatches, f"{piece} slope", slope, float(expected_slope), 1e-12)
        _expect(mismatches, f"{piece} intercept", gu - slope * u, float(expected_intercept), 1e-12)

    g = {x: _g_exact(x, t0, coefficients) for x in (-x0, Fraction(0), x0, y0)}
    chord_gap = g[-x0] + g[x0] - 2 * g[Fraction(0)]
    if chord_gap != c * x0 * (a2 - a3):
        mismatches.append(f"g(-x0) + g(x0) - 2 g(0) = {chord_gap}, expected {c * x0 * (a2 - a3)}")

    x_law = DiscreteDistribution(atoms=[float(-x0), float(x0), float(y0)], probs=[0.25, 0.25, 0.5])
    y_law = x_law  # Y = 2X 1{X = y0} - X has the law of X
    mid_law = DiscreteDistribution(atoms=[0.0, float(y0)], probs=[0.5, 0.5])
    for label, law in (("X", x_law), ("Y", y_law), ("(X+Y)/2", mid_law)):
        _expect(mismatches, f"Lambda-VaR({label})", lambda_var(law, lam), float(t0), 1e-12)

    rho_x_exact = (g[-x0] + g[x0]) / 4 + g[y0] / 2
    rho_mid_exact = (g[Fraction(0)] + g[y0]) / 2
    rho_x = float(c) * expected_lambda_var_score(float(t0), x_law, lam) + x_law.mean
    rho_mid = float(c) * expected_lambda_var_score(float(t0), mid_law, lam) + mid_law.mean
    _expect(mismatches, "rho(X)", rho_x, float(rho_x_exact), 1e-12)
    _expect(mismatches, "rho((X+Y)/2)", rho_mid, float(rho_mid_exact), 1e-12)

    # rho_c((X+Y)/2) - rho_c(X) = -c x0 (alpha_2 - alpha_3) / 4; recorded per c, not asserted
    sweep = {}
    for value in c_sweep:
        swept = Fraction(value).limit_denominator()
        sx = value * expected_lambda_var_score(float(t0), x_law, lam) + x_law.mean
        smid = value * expected_lambda_var_score(float(t0), mid_law, lam) + mid_law.mean
        chord = float(swept * x0 * (a2 - a3))
        _expect(mismatches, f"rho_{value}((X+Y)/2) - rho_{value}(X)", smid - sx, -chord / 4, 1e-12)
        sweep[str(value)] = {"chord_gap": chord, "rho_X": sx, "rho_mid": smid, "midpoint_above": smid > sx}

    violated = rho_x_exact < rho_mid_exact
    return PropertyReport(
        name="counterexample_a3",
        trials=1,
        failures=int(violated),
        witness={"lambda": lam.model_dump(), "X": x_law.model_dump(), "midpoint": mid_law.model_dump(),
                 "rho_X": float(rho_x_exact), "rho_Y": float(rho_x_exact), "rho_mid": float(rho_mid_exact)},
        expect_failures=True,
        mismatches=mismatches,
        details={
            "parameters": {"x0": str(x0), "t0": str(t0), "y0": str(y0),
                           "alphas": [str(a) for a in alphas], "c": str(c)},
            "coefficients": {k: [str(s), str(i)] for k, (s, i) in coefficients.items()},
            "margin": float(rho_mid_exact - rho_x_exact),
            "chord_gap_by_c": sweep,
        },
    )
