"""Dense two-phase primal simplex with Bland's rule.

Problems are stated as

    minimise c x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper

and brought to standard form (nonnegative variables, equality rows with a
nonnegative right-hand side) before the tableau is built.
"""

import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.config import settings
from src.errors import InvalidInputError, IterationLimitError

logger = logging.getLogger(__name__)


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPProblem(BaseModel):
    """Linear program in inequality form with variable bounds."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @model_validator(mode="before")
    @classmethod
    def _as_arrays(cls, data: dict) -> dict:
        if not isinstance(data, dict):
            return data
        out = dict(data)
        n = np.asarray(out["c"], dtype=float).size
        out["c"] = np.asarray(out["c"], dtype=float).ravel()
        for a_key, b_key in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            if out.get(a_key) is None:
                out[a_key] = np.zeros((0, n))
                out[b_key] = np.zeros(0)
            else:
                out[a_key] = np.atleast_2d(np.asarray(out[a_key], dtype=float))
                out[b_key] = np.asarray(out[b_key], dtype=float).ravel()
            if out[a_key].shape[1] != n or out[a_key].shape[0] != out[b_key].size:
                raise InvalidInputError(f"{a_key} / {b_key} shapes do not match {n} variables")
        lower = out.get("lower")
        upper = out.get("upper")
        out["lower"] = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).ravel()
        out["upper"] = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).ravel()
        if np.any(out["lower"] > out["upper"]):
            raise InvalidInputError("a lower bound exceeds its upper bound")
        return out

    @property
    def num_variables(self) -> int:
        return self.c.size


class LPSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    max_residual: float = 0.0


class _StandardForm:
    """min cost y s.t. A y = b, y >= 0, with x = offset + transform @ y."""

    def __init__(self, problem: LPProblem):
        n = problem.num_variables
        columns: list[np.ndarray] = []
        offset = np.zeros(n)
        bound_rows: list[tuple[int, float]] = []
        for i in range(n):
            lo, hi = problem.lower[i], problem.upper[i]
            unit = np.zeros(n)
            unit[i] = 1.0
            if np.isfinite(lo):
                offset[i] = lo
                columns.append(unit)
                if np.isfinite(hi):
                    bound_rows.append((len(columns) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[i] = hi
                columns.append(-unit)
            else:
                columns.append(unit)
                columns.append(-unit)
        self.offset = offset
        self.transform = np.column_stack(columns) if columns else np.zeros((n, 0))
        num_y = self.transform.shape[1]

        a_ub = problem.A_ub @ self.transform
        b_ub = problem.b_ub - problem.A_ub @ offset
        if bound_rows:
            extra = np.zeros((len(bound_rows), num_y))
            for k, (col, width) in enumerate(bound_rows):
                extra[k, col] = 1.0
            a_ub = np.vstack([a_ub, extra])
            b_ub = np.concatenate([b_ub, [w for _, w in bound_rows]])
        a_eq = problem.A_eq @ self.transform
        b_eq = problem.b_eq - problem.A_eq @ offset

        num_slack = a_ub.shape[0]
        self.num_structural = num_y + num_slack
        self.A = np.vstack(
            [
                np.hstack([a_ub, np.eye(num_slack)]),
                np.hstack([a_eq, np.zeros((a_eq.shape[0], num_slack))]),
            ]
        )
        self.b = np.concatenate([b_ub, b_eq])
        # a slack can start in the basis only on a row that is not flipped
        self.slack_basis = [
            num_y + k if self.b[k] >= 0 else -1 for k in range(num_slack)
        ] + [-1] * a_eq.shape[0]
        flip = self.b < 0
        self.A[flip] *= -1.0
        self.b[flip] *= -1.0
        self.cost = np.concatenate([problem.c @ self.transform, np.zeros(num_slack)])
        self.constant = float(problem.c @ offset)

    def recover(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.transform @ y[: self.transform.shape[1]]


class SimplexTableau:
    """Dense tableau whose last row holds reduced costs and the negated objective."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], tol: float):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.tol = tol
        self.iterations = 0

    @property
    def num_rows(self) -> int:
        return self.T.shape[0] - 1

    @property
    def num_columns(self) -> int:
        return self.T.shape[1] - 1

    def set_cost(self, cost: np.ndarray) -> None:
        self.T[-1, :] = 0.0
        self.T[-1, : cost.size] = cost
        for i, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1] -= self.T[-1, j] * self.T[i]

    def pivot(self, i: int, j: int) -> None:
        self.T[i] /= self.T[i, j]
        column = self.T[:, j].copy()
        column[i] = 0.0
        self.T -= np.outer(column, self.T[i])
        self.basis[i] = j
        self.iterations += 1

    def bland_primal_step(self, allowed: int) -> str:
        """One pivot: entering = smallest improving index, leaving = smallest basic index among ties."""
        reduced = self.T[-1, :allowed]
        improving = np.flatnonzero(reduced < -self.tol)
        if improving.size == 0:
            return "optimal"
        j = int(improving[0])
        col = self.T[:-1, j]
        rows = np.flatnonzero(col > self.tol)
        if rows.size == 0:
            return "unbounded"
        ratios = self.T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: self.basis[r]))
        self.pivot(i, j)
        return "go_on"

    def run(self, allowed: int, max_iterations: int) -> str:
        while True:
            if self.iterations >= max_iterations:
                raise IterationLimitError(f"simplex exceeded {max_iterations} pivots")
            status = self.bland_primal_step(allowed)
            if status != "go_on":
                return status

    def drop_row(self, i: int) -> None:
        self.T = np.delete(self.T, i, axis=0)
        del self.basis[i]

    def solution(self) -> np.ndarray:
        y = np.zeros(self.num_columns)
        for i, j in enumerate(self.basis):
            y[j] = self.T[i, -1]
        return y


def _max_residual(problem: LPProblem, x: np.ndarray) -> float:
    parts = [0.0]
    if problem.A_ub.size:
        parts.append(float(np.max(problem.A_ub @ x - problem.b_ub, initial=0.0)))
    if problem.A_eq.size:
        parts.append(float(np.max(np.abs(problem.A_eq @ x - problem.b_eq), initial=0.0)))
    parts.append(float(np.max(problem.lower - x, initial=0.0)))
    parts.append(float(np.max(x - problem.upper, initial=0.0)))
    return max(parts)


def solve_lp(problem: LPProblem) -> LPSolution:
    """
    Solve a linear program with the two-phase simplex method.

    Args:
        problem: The program to solve

    Returns:
        Solution with status, primal point and objective value

    Raises:
        IterationLimitError: the pivot guard was exceeded
    """
    tol = settings.lp_tolerance
    form = _StandardForm(problem)
    m, n = form.A.shape

    # Phase 1: artificials on the rows without a usable slack
    needs_artificial = [i for i, s in enumerate(form.slack_basis) if s < 0]
    artificial = np.zeros((m, len(needs_artificial)))
    for k, i in enumerate(needs_artificial):
        artificial[i, k] = 1.0
    basis = list(form.slack_basis)
    for k, i in enumerate(needs_artificial):
        basis[i] = n + k
    tableau = SimplexTableau(np.hstack([form.A, artificial]), form.b, basis, tol)

    if needs_artificial:
        phase_one = np.concatenate([np.zeros(n), np.ones(len(needs_artificial))])
        tableau.set_cost(phase_one)
        tableau.run(tableau.num_columns, settings.lp_max_iterations)
        infeasibility = -tableau.T[-1, -1]
        if infeasibility > tol * max(1.0, float(np.abs(form.b).max(initial=0.0))):
            logger.debug("LP infeasible: phase-one objective %.3e", infeasibility)
            return LPSolution(status=LPStatus.INFEASIBLE, iterations=tableau.iterations)
        # drive remaining artificials out of the basis
        i = 0
        while i < tableau.num_rows:
            if tableau.basis[i] >= n:
                candidates = np.flatnonzero(np.abs(tableau.T[i, :n]) > tol)
                if candidates.size:
                    tableau.pivot(i, int(candidates[0]))
                else:
                    tableau.drop_row(i)
                    continue
            i += 1

    tableau.set_cost(form.cost)
    status = tableau.run(n, settings.lp_max_iterations)
    if status == "unbounded":
        return LPSolution(status=LPStatus.UNBOUNDED, iterations=tableau.iterations)

    x = form.recover(tableau.solution())
    residual = _max_residual(problem, x)
    if residual > settings.lp_residual_tolerance:
        logger.warning("LP solution violates constraints by %.3e", residual)
    logger.debug("LP solved in %d pivots", tableau.iterations)
    return LPSolution(
        status=LPStatus.OPTIMAL,
        x=x,
        objective=float(problem.c @ x),
        iterations=tableau.iterations,
        max_residual=residual,
    )
