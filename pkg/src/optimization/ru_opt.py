"""Rockafellar-Uryasev representation of Lambda-ES and portfolio optimisation.

The T-functional

    T(a, x, X) = max(a + E[(X - a)+] / (1 - Lambda(x)), x)

has Lambda-ES as its minimum over (a, x). For linear portfolio losses the inner
problem at a fixed level is the classical CVaR linear program, solved with the
simplex in ``src.optimization.lp``.
"""

import logging
import math
from collections.abc import Callable, Sequence
from typing import Annotated, Literal, NamedTuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.config import settings
from src.errors import (
    ContinuityError,
    InfeasibleProblemError,
    InvalidInputError,
    PreconditionError,
    UnboundedProblemError,
)
from src.optimization.lp import LPProblem, LPSolution, LPStatus, solve_lp
from src.risk.dist import DiscreteDistribution, Distribution, RandomVector, validate_level
from src.risk.lambdas import BaseLambda, one_over_one_minus_convex
from src.risk.measures import es_ru, inf_crossing
from src.utils import is_midpoint_convex, safe_divide

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


# Scenario data and feasible sets


class ScenarioMatrix(BaseModel):
    """Losses L[j, i] of asset i in scenario j with scenario probabilities."""

    model_config = ConfigDict(frozen=True)

    losses: tuple[tuple[float, ...], ...]
    probs: tuple[float, ...]
    asset_names: tuple[str, ...] = ()

    _matrix: np.ndarray = PrivateAttr()

    @model_validator(mode="before")
    @classmethod
    def _normalise(cls, data: dict) -> dict:
        if not isinstance(data, dict):
            return data
        rows = tuple(tuple(float(v) for v in row) for row in data.get("losses", ()))
        probs = tuple(float(p) for p in data.get("probs", ()))
        names = tuple(data.get("asset_names") or ())
        if not names:
            width = len(rows[0]) if rows else 0
            names = tuple(f"asset_{i + 1}" for i in range(width))
        return {"losses": rows, "probs": probs, "asset_names": names}

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ScenarioMatrix":
        m = len(self.losses)
        if m == 0 or len(self.probs) != m:
            raise InvalidInputError("every scenario needs a loss row and a probability")
        n = len(self.losses[0])
        if n == 0 or any(len(row) != n for row in self.losses) or len(self.asset_names) != n:
            raise InvalidInputError("loss rows must all have one entry per asset")
        if n > settings.lp_max_assets or m > settings.lp_max_scenarios:
            raise InvalidInputError(
                f"at most {settings.lp_max_assets} assets and "
                f"{settings.lp_max_scenarios} scenarios are supported"
            )
        if any(p <= 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > settings.prob_tolerance:
            raise InvalidInputError("scenario probabilities must be positive and sum to 1")
        return self

    def model_post_init(self, __context) -> None:
        self._matrix = np.asarray(self.losses, dtype=float)

    @classmethod
    def uniform(cls, losses: Sequence[Sequence[float]], asset_names: Sequence[str] = ()) -> "ScenarioMatrix":
        m = len(losses)
        return cls(losses=losses, probs=[1.0 / m] * m, asset_names=tuple(asset_names))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def num_scenarios(self) -> int:
        return self._matrix.shape[0]

    @property
    def num_assets(self) -> int:
        return self._matrix.shape[1]


class ThetaConstraints(NamedTuple):
    lower: np.ndarray
    upper: np.ndarray
    budget: bool


class SimplexSet(BaseModel):
    """theta >= 0 with sum(theta) = 1."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["simplex"] = "simplex"

    def constraints(self, n: int) -> ThetaConstraints:
        return ThetaConstraints(np.zeros(n), np.full(n, np.inf), True)


class BoxSet(BaseModel):
    """lo <= theta <= hi per asset, optionally with sum(theta) = 1."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["box"] = "box"
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    budget: bool = True

    @model_validator(mode="after")
    def _check_box(self) -> "BoxSet":
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi need one entry per asset")
        if any(not (math.isfinite(a) and math.isfinite(b)) or a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box bounds must be finite with lo <= hi")
        return self

    def constraints(self, n: int) -> ThetaConstraints:
        if len(self.lo) != n:
            raise InvalidInputError(f"box has {len(self.lo)} bounds for {n} assets")
        return ThetaConstraints(np.asarray(self.lo, float), np.asarray(self.hi, float), self.budget)


FeasibleSet = Annotated[Union[SimplexSet, BoxSet], Field(discriminator="type")]


class TMinimum(NamedTuple):
    value: float
    a_star: float
    x_star: float


class PortfolioSolution(BaseModel):
    """Optimal weights of a portfolio problem."""

    theta: tuple[float, ...]
    value: float
    a_star: float | None = None
    x_star: float | None = None
    level: float | None = None
    golden_section_value: float | None = None
    lp_iterations: int = 0


class QuasiConvexityViolation(BaseModel):
    """Two points of (a, x) whose midpoint has a larger T than both ends."""

    x: float
    y: float
    t: float
    outcomes: tuple[float, float]
    probs: tuple[float, float]
    endpoint_values: tuple[float, float]
    midpoint_value: float


class ConvexityRegimeReport(BaseModel):
    joint_convex: bool
    x_convex_observed: bool
    x_convex_predicted: bool | None
    quasi_convexity_violation: QuasiConvexityViolation | None
    constant_lambda: bool

    @property
    def ok(self) -> bool:
        consistent = self.x_convex_predicted is not True or self.x_convex_observed
        violation_as_expected = self.constant_lambda == (self.quasi_convexity_violation is None)
        return self.joint_convex and consistent and violation_as_expected


def portfolio_losses(scenarios: ScenarioMatrix, theta: Sequence[float]) -> np.ndarray:
    """Scenario losses theta^T L_j of a portfolio."""
    return scenarios.matrix @ np.asarray(theta, dtype=float)


# T-functional


def t_functional(a: float, x: float, dist: Distribution, lam: BaseLambda) -> float:
    """max(a + E[(X - a)+] / (1 - Lambda(x)), x) with 0/0 = 0 and c/0 = +inf."""
    return max(a + safe_divide(dist.stop_loss(a), 1.0 - lam.eval(x)), x)


def _require_right_continuous(lam: BaseLambda) -> None:
    if not lam.is_right_continuous():
        raise ContinuityError("this operation needs a right-continuous Lambda")


def minimize_t(dist: Distribution, lam: BaseLambda) -> TMinimum:
    """
    Joint minimum of T over (a, x).

    The inner minimum over a is ES at level Lambda(x) (closed form), the outer
    one the crossing of that curve with the identity.

    Raises:
        ContinuityError: Lambda is not right-continuous
    """
    _require_right_continuous(lam)
    x_star = inf_crossing(
        lambda level: es_ru(dist, level).value, lam, dist.mean - 1.0, dist.ess_sup + 1.0
    )
    level = lam.eval(x_star)
    if level >= 1.0:
        a_star = dist.ess_sup
    else:
        lo = dist.var_left(level)
        a_star = lo if math.isfinite(lo) else dist.var_right(level)
    return TMinimum(t_functional(a_star, x_star, dist, lam), a_star, x_star)


def constraint_rewrite(lam: BaseLambda, ell: float) -> float:
    """
    Level Lambda(ell) such that Lambda-ES(Y) <= ell iff ES_{Lambda(ell)}(Y) <= ell.

    Raises:
        ContinuityError: Lambda is not right-continuous
    """
    _require_right_continuous(lam)
    return lam.eval(ell)


def _expected_excess(values: np.ndarray, probs: np.ndarray, a: float) -> float:
    return float(np.dot(probs, np.maximum(values - a, 0.0)))


def _t_on_vector(a: float, x: float, values: np.ndarray, probs: np.ndarray, lam: BaseLambda) -> float:
    return max(a + safe_divide(_expected_excess(values, probs, a), 1.0 - lam.eval(x)), x)


def _find_quasi_convexity_violation(lam: BaseLambda) -> QuasiConvexityViolation | None:
    grid = lam.default_probe_grid()
    pairs: list[tuple[float, float]] = []
    for b in lam.breakpoints():
        delta = 1e-3 * max(1.0, abs(b))
        pairs.append((b - 3.0 * delta, b + delta))
    pairs.extend((float(grid[i]), float(grid[i + 2])) for i in range(len(grid) - 2))
    for y, x in pairs:
        mid = 0.5 * (x + y)
        lam_x, lam_mid = lam.eval(x), lam.eval(mid)
        if not lam_x < lam_mid < 1.0:
            continue
        t = x
        a = t - 1.0
        outcomes = np.array([a, t])
        probs = np.array([lam_x, 1.0 - lam_x])
        ends = (
            _t_on_vector(a, x, outcomes, probs, lam),
            _t_on_vector(t, y, outcomes, probs, lam),
        )
        middle = _t_on_vector(0.5 * (a + t), mid, outcomes, probs, lam)
        if middle > max(ends) + settings.measure_tolerance:
            return QuasiConvexityViolation(
                x=x,
                y=y,
                t=t,
                outcomes=(a, t),
                probs=(float(probs[0]), float(probs[1])),
                endpoint_values=ends,
                midpoint_value=middle,
            )
    return None


def convexity_regime_report(
    lam: BaseLambda,
    dist: Distribution,
    trials: int = 200,
    rng: np.random.Generator | None = None,
) -> ConvexityRegimeReport:
    """
    Probe the convexity structure of T.

    Joint midpoint convexity in (a, X) at fixed x, convexity in x compared with
    the convexity of 1/(1 - Lambda), and the two-point quasi-convexity
    counterexample that exists for every non-constant Lambda.
    """
    rng = rng if rng is not None else np.random.default_rng(settings.seed)
    grid = lam.default_probe_grid()
    usable = grid[lam.evaluate_many(grid) < 1.0]

    if isinstance(dist, DiscreteDistribution):
        base_values = np.asarray(dist.atoms, dtype=float)
        probs = np.asarray(dist.probs, dtype=float)
    else:
        probs = np.full(64, 1.0 / 64)
        base_values = np.array([dist.var_left((k + 0.5) / 64) for k in range(64)])

    joint_convex = True
    spread = max(1.0, dist.ess_sup - dist.ess_inf)
    for _ in range(trials if usable.size else 0):
        x = float(rng.choice(usable))
        first = base_values + rng.normal(0.0, spread, base_values.size)
        second = rng.permutation(base_values) + rng.normal(0.0, spread, base_values.size)
        a1, a2 = rng.uniform(dist.ess_inf - spread, dist.ess_sup + spread, 2)
        t1 = _t_on_vector(a1, x, first, probs, lam)
        t2 = _t_on_vector(a2, x, second, probs, lam)
        tm = _t_on_vector(0.5 * (a1 + a2), x, 0.5 * (first + second), probs, lam)
        if tm > 0.5 * (t1 + t2) + settings.measure_tolerance * (1.0 + abs(t1) + abs(t2)):
            joint_convex = False
            break

    a_fixed = dist.ess_inf - 1.0
    x_convex_observed, _ = is_midpoint_convex(lambda x: t_functional(a_fixed, x, dist, lam), usable)
    try:
        predicted: bool | None = one_over_one_minus_convex(lam, usable)
    except PreconditionError:
        predicted = None

    violation = _find_quasi_convexity_violation(lam)
    report = ConvexityRegimeReport(
        joint_convex=joint_convex,
        x_convex_observed=x_convex_observed,
        x_convex_predicted=predicted,
        quasi_convexity_violation=violation,
        constant_lambda=lam.is_constant,
    )
    logger.debug("Convexity regime of %s: %s", lam.type, report)
    return report


# Linear programs


class _LPLayout:
    """Column bookkeeping for the portfolio LPs: theta first, then named blocks."""

    def __init__(self, scenarios: ScenarioMatrix, feasible: SimplexSet | BoxSet):
        self.scenarios = scenarios
        self.theta = slice(0, scenarios.num_assets)
        self.size = scenarios.num_assets
        bounds = feasible.constraints(scenarios.num_assets)
        self.lower = [bounds.lower]
        self.upper = [bounds.upper]
        self.budget = bounds.budget
        self.rows: list[np.ndarray] = []
        self.rhs: list[float] = []

    def add(self, count: int, lower: float, upper: float = math.inf) -> slice:
        block = slice(self.size, self.size + count)
        self.size += count
        self.lower.append(np.full(count, lower))
        self.upper.append(np.full(count, upper))
        return block

    def add_ru_rows(self, a: slice, u: slice | None) -> None:
        """theta^T L_j - a - u_j <= 0 for every scenario j (u omitted: minimax rows)."""
        for j in range(self.scenarios.num_scenarios):
            row = np.zeros(self.size)
            row[self.theta] = self.scenarios.matrix[j]
            row[a] = -1.0
            if u is not None:
                row[u.start + j] = -1.0
            self.rows.append(row)
            self.rhs.append(0.0)

    def add_row(self, coefficients: list[tuple[slice, float | np.ndarray]], rhs: float) -> None:
        row = np.zeros(self.size)
        for where, value in coefficients:
            row[where] = value
        self.rows.append(row)
        self.rhs.append(rhs)

    def problem(self, cost: np.ndarray) -> LPProblem:
        width = self.size
        a_ub = np.vstack([np.pad(r, (0, width - r.size)) for r in self.rows])
        a_eq = b_eq = None
        if self.budget:
            a_eq = np.zeros((1, width))
            a_eq[0, self.theta] = 1.0
            b_eq = np.ones(1)
        return LPProblem(
            c=np.pad(cost, (0, width - cost.size)),
            A_ub=a_ub,
            b_ub=np.asarray(self.rhs),
            A_eq=a_eq,
            b_eq=b_eq,
            lower=np.concatenate(self.lower),
            upper=np.concatenate(self.upper),
        )


def _checked(solution: LPSolution, what: str) -> LPSolution:
    if solution.status == LPStatus.INFEASIBLE:
        raise InfeasibleProblemError(f"{what} has no feasible portfolio")
    if solution.status == LPStatus.UNBOUNDED:
        raise UnboundedProblemError(f"{what} is unbounded")
    return solution


def cvar_lp(scenarios: ScenarioMatrix, alpha: float, feasible: SimplexSet | BoxSet) -> PortfolioSolution:
    """
    Minimise ES_alpha of the portfolio loss over the feasible set.

    Variables are theta, a free threshold a and excesses u_j >= 0; the objective
    is a + sum_j p_j u_j / (1 - alpha) with u_j >= theta^T L_j - a.

    Raises:
        InvalidInputError: alpha is not below 1
        InfeasibleProblemError: the feasible set is empty
    """
    alpha = validate_level(alpha)
    if alpha >= 1.0:
        raise InvalidInputError("cvar_lp needs a level below 1")
    layout = _LPLayout(scenarios, feasible)
    a = layout.add(1, -math.inf)
    u = layout.add(scenarios.num_scenarios, 0.0)
    layout.add_ru_rows(a, u)
    cost = np.zeros(layout.size)
    cost[a] = 1.0
    cost[u] = np.asarray(scenarios.probs) / (1.0 - alpha)
    solution = _checked(solve_lp(layout.problem(cost)), "the CVaR program")
    return PortfolioSolution(
        theta=tuple(solution.x[layout.theta].tolist()),
        value=float(solution.objective),
        a_star=float(solution.x[a][0]),
        level=alpha,
        lp_iterations=solution.iterations,
    )


def _minimax_lp(scenarios: ScenarioMatrix, feasible: SimplexSet | BoxSet) -> PortfolioSolution:
    layout = _LPLayout(scenarios, feasible)
    t = layout.add(1, -math.inf)
    layout.add_ru_rows(t, None)
    cost = np.zeros(layout.size)
    cost[t] = 1.0
    solution = _checked(solve_lp(layout.problem(cost)), "the minimax program")
    return PortfolioSolution(
        theta=tuple(solution.x[layout.theta].tolist()),
        value=float(solution.objective),
        a_star=float(solution.x[t][0]),
        level=1.0,
        lp_iterations=solution.iterations,
    )


def min_es_at_level(scenarios: ScenarioMatrix, level: float, feasible: SimplexSet | BoxSet) -> PortfolioSolution:
    """min over theta of ES_level(theta^T L); level 1 is the minimax program."""
    level = validate_level(level)
    if level == 1.0:
        return _minimax_lp(scenarios, feasible)
    return cvar_lp(scenarios, level, feasible)


def _golden_section(func: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Minimiser of a unimodal function; ties keep the left interval."""
    x1 = hi - GOLDEN_RATIO * (hi - lo)
    x2 = lo + GOLDEN_RATIO * (hi - lo)
    f1, f2 = func(x1), func(x2)
    for _ in range(settings.bisection_max_iterations):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN_RATIO * (hi - lo)
            f1 = func(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN_RATIO * (hi - lo)
            f2 = func(x2)
    return 0.5 * (lo + hi)


def min_portfolio_lambda_es(
    scenarios: ScenarioMatrix,
    lam: BaseLambda,
    feasible: SimplexSet | BoxSet,
) -> PortfolioSolution:
    """
    Minimise Lambda-ES of the portfolio loss over the feasible set.

    v(level) = min over theta of ES_level is nondecreasing, and the optimum is
    the crossing inf_x max(v(Lambda(x)), x). When 1/(1 - Lambda) is convex the
    same value is also located by golden-section search on that function.

    Raises:
        ContinuityError: Lambda is not right-continuous
        InfeasibleProblemError: the feasible set is empty
    """
    _require_right_continuous(lam)
    cache: dict[float, PortfolioSolution] = {}

    def solve_at(level: float) -> PortfolioSolution:
        if level not in cache:
            cache[level] = min_es_at_level(scenarios, level, feasible)
        return cache[level]

    def v(level: float) -> float:
        return solve_at(level).value

    lo, hi = v(0.0) - 1.0, v(1.0) + 1.0
    x_star = inf_crossing(v, lam, lo, hi)
    level = lam.eval(x_star)
    best = solve_at(level)

    golden: float | None = None
    try:
        convex = one_over_one_minus_convex(lam)
    except PreconditionError:
        convex = False
    if convex:
        arg = _golden_section(lambda x: max(v(lam.eval(x)), x), lo, hi)
        golden = max(v(lam.eval(arg)), arg)
        if abs(golden - x_star) > 1e-6 * max(1.0, abs(x_star)):
            logger.warning("Golden-section value %.17g disagrees with crossing %.17g", golden, x_star)

    logger.debug("Portfolio Lambda-ES %.17g at level %.17g after %d LPs", x_star, level, len(cache))
    return PortfolioSolution(
        theta=best.theta,
        value=x_star,
        a_star=best.a_star,
        x_star=x_star,
        level=level,
        golden_section_value=golden,
        lp_iterations=sum(s.lp_iterations for s in cache.values()),
    )


def min_objective_with_lambda_es_constraint(
    scenarios: ScenarioMatrix,
    objective_level: float,
    lam: BaseLambda,
    ell: float,
    feasible: SimplexSet | BoxSet,
) -> PortfolioSolution:
    """
    Minimise ES at ``objective_level`` subject to Lambda-ES <= ell.

    The constraint is rewritten to ES_{Lambda(ell)} <= ell, which is one RU
    block; the objective is a second RU block (a minimax block at level 1).

    Raises:
        ContinuityError: Lambda is not right-continuous
        InfeasibleProblemError: no feasible portfolio meets the constraint
    """
    objective_level = validate_level(objective_level)
    gamma = constraint_rewrite(lam, ell)
    m = scenarios.num_scenarios
    probs = np.asarray(scenarios.probs)

    layout = _LPLayout(scenarios, feasible)
    a1 = layout.add(1, -math.inf)
    u1 = layout.add(m, 0.0) if objective_level < 1.0 else None
    layout.add_ru_rows(a1, u1)
    if gamma < 1.0:
        a2 = layout.add(1, -math.inf)
        u2 = layout.add(m, 0.0)
        layout.add_ru_rows(a2, u2)
        layout.add_row([(a2, 1.0), (u2, probs / (1.0 - gamma))], ell)
    else:
        for j in range(m):
            layout.add_row([(layout.theta, scenarios.matrix[j])], ell)

    cost = np.zeros(layout.size)
    cost[a1] = 1.0
    if u1 is not None:
        cost[u1] = probs / (1.0 - objective_level)
    solution = _checked(solve_lp(layout.problem(cost)), "the constrained program")
    return PortfolioSolution(
        theta=tuple(solution.x[layout.theta].tolist()),
        value=float(solution.objective),
        a_star=float(solution.x[a1][0]),
        level=gamma,
        lp_iterations=solution.iterations,
    )


def law_of_portfolio(scenarios: ScenarioMatrix, theta: Sequence[float]) -> RandomVector:
    """Random vector carrying the portfolio loss as variable ``loss``."""
    return RandomVector(probs=scenarios.probs).with_variable("loss", portfolio_losses(scenarios, theta))
