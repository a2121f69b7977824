"""Property checks for Lambda-VaR, Lambda-ES and their representations."""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Any, ClassVar

import numpy as np
from pydantic import BaseModel, Field

from src.config import settings
from src.errors import PreconditionError
from src.optimization.ru_opt import (
    ScenarioMatrix,
    SimplexSet,
    constraint_rewrite,
    convexity_regime_report,
    cvar_lp,
    min_portfolio_lambda_es,
    minimize_t,
    portfolio_losses,
)
from src.risk.dist import (
    DiscreteDistribution,
    Distribution,
    icx_dominates,
    mixture,
)
from src.risk.dual import (
    MeasureChange,
    dual_lower_bound_check,
    r_function,
    r_properties_check,
    witness_supremum,
)
from src.risk.lambdas import BaseLambda, ConstantLambda, StepLambda
from src.risk.measures import (
    es,
    es_ru,
    is_tail_measure_invariant,
    lambda_es,
    lambda_es_bisection,
    lambda_es_inf_form,
    lambda_es_is_finite,
    lambda_var,
    lambda_var_inf_form,
    lambda_var_right,
    lambda_var_sup_form,
    var_left,
    var_right,
)
from src.verification.generators import (
    mean_preserving_spread,
    raised_lambda,
    random_discrete,
    random_lambda,
    random_law,
    random_measure_change,
    random_probs,
    random_step_lambda,
    random_vector,
)

logger = logging.getLogger(__name__)


class PropertyReport(BaseModel):
    """Outcome of one property sweep or counterexample reproduction."""

    name: str
    trials: int = 0
    failures: int = 0
    seed: int | None = None
    witness: dict[str, Any] | None = None
    details: dict[str, Any] = Field(default_factory=dict)
    skipped_reason: str | None = None
    expect_failures: bool = False  # the property is false and the report carries a counterexample
    mismatches: list[str] = Field(default_factory=list)
    duration_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        if self.skipped_reason is not None:
            return not self.mismatches
        if self.mismatches:
            return False
        if self.expect_failures:
            return self.failures > 0 and self.witness is not None
        return self.failures == 0


class _Tally:
    """Failure counter keeping the first witness."""

    def __init__(self) -> None:
        self.trials = 0
        self.failures = 0
        self.witness: dict[str, Any] | None = None

    def record(self, passed: bool, witness: Callable[[], dict[str, Any]]) -> None:
        self.trials += 1
        if passed:
            return
        self.failures += 1
        if self.witness is None:
            self.witness = witness()


def _scale(*values: float) -> float:
    finite = [abs(v) for v in values if math.isfinite(v)]
    return max([1.0, *finite])


def _leq(a: float, b: float, tol: float | None = None) -> bool:
    """a <= b up to a tolerance scaled by the magnitudes."""
    tol = settings.measure_tolerance if tol is None else tol
    if a == b:
        return True
    return a <= b + tol * _scale(a, b)


def _close(a: float, b: float, tol: float | None = None) -> bool:
    return _leq(a, b, tol) and _leq(b, a, tol)


def _law(dist: Distribution) -> dict[str, Any]:
    return {"kind": type(dist).__name__, **dist.model_dump()}


def _spec(lam: BaseLambda) -> dict[str, Any]:
    return lam.model_dump()


def _es_value(dist: Distribution, lam: BaseLambda) -> float:
    return lambda_es(dist, lam)[0]


def _level(lam: BaseLambda) -> float:
    return lam.eval(0.0)


MEASURES: dict[str, Callable[[Distribution, BaseLambda], float]] = {
    "lambda_var": lambda_var,
    "lambda_es": _es_value,
    "es": lambda dist, lam: es(dist, _level(lam)),
    "var_left": lambda dist, lam: var_left(dist, _level(lam)),
}


class PropertyCheck(ABC):
    """A named property evaluated over seeded random trials."""

    name: ClassVar[str]
    expect_failures: ClassVar[bool] = False

    def default_trials(self) -> int:
        return settings.property_trials

    @abstractmethod
    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        """
        Run the check.

        Args:
            rng: Seeded generator driving every random draw
            trials: Number of random trials

        Returns:
            Report with the failure count and the first witness
        """
        pass

    def _report(self, tally: _Tally, **extra: Any) -> PropertyReport:
        return PropertyReport(
            name=self.name,
            trials=tally.trials,
            failures=tally.failures,
            witness=tally.witness,
            expect_failures=self.expect_failures,
            **extra,
        )


# Axioms of Lambda-ES


class MonotonicityCheck(PropertyCheck):
    """X >= Y pointwise implies rho(X) >= rho(Y)."""

    name = "monotonicity"

    def __init__(self, measure: str = "lambda_es", lam: BaseLambda | None = None):
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}; expected one of {sorted(MEASURES)}")
        self.measure = measure
        self.lam = lam
        self.name = f"monotonicity[{measure}]"

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        rho = MEASURES[self.measure]
        tally = _Tally()
        for _ in range(trials):
            vector = random_vector(rng, 10, names=("Y",))
            bump = np.where(rng.random(10) < 0.3, 0.0, np.round(rng.exponential(1.0, 10), 6))
            x = vector.values("Y") + bump
            lam = self.lam or random_lambda(rng)
            rx = rho(vector.law_of(x), lam)
            ry = rho(vector.law("Y"), lam)
            tally.record(
                _leq(ry, rx),
                lambda: {"lambda": _spec(lam), "X": x.tolist(), "Y": list(vector.variables["Y"]),
                         "probs": list(vector.probs), "rho_X": rx, "rho_Y": ry},
            )
        return self._report(tally)


class CashSubadditivityCheck(PropertyCheck):
    """Lambda-ES(X + m) <= Lambda-ES(X) + m for m >= 0."""

    name = "cash_subadditivity"

    def __init__(self, lam: BaseLambda | None = None):
        self.lam = lam

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        additive_gap = 0.0
        for k in range(trials):
            dist = random_law(rng)
            lam = self.lam or random_lambda(rng)
            m = 0.0 if k % 10 == 0 else float(np.round(rng.uniform(0.0, 3.0), 6))
            before = _es_value(dist, lam)
            after = _es_value(dist.shift(m), lam)
            if lam.is_constant:
                additive_gap = max(additive_gap, abs(after - before - m))
            tally.record(
                _leq(after, before + m),
                lambda: {"lambda": _spec(lam), "law": _law(dist), "m": m, "before": before, "after": after},
            )
        return self._report(tally, details={"max_constant_lambda_gap": additive_gap})


class QuasiConvexityCheck(PropertyCheck):
    """Lambda-ES(gX + (1-g)Y) <= max(Lambda-ES(X), Lambda-ES(Y))."""

    name = "quasi_convexity"

    def __init__(self, lam: BaseLambda | None = None):
        self.lam = lam

    def default_trials(self) -> int:
        return settings.quasi_convexity_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            vector = random_vector(rng, 12)
            gamma = float(rng.uniform())
            lam = self.lam or random_lambda(rng)
            x, y = vector.values("X"), vector.values("Y")
            z = gamma * x + (1.0 - gamma) * y
            rx = _es_value(vector.law("X"), lam)
            ry = _es_value(vector.law("Y"), lam)
            rz = _es_value(vector.law_of(z), lam)
            tally.record(
                _leq(rz, max(rx, ry)),
                lambda: {"lambda": _spec(lam), "gamma": gamma, "probs": list(vector.probs),
                         "X": x.tolist(), "Y": y.tolist(), "values": [rx, ry, rz]},
            )
        return self._report(tally)


class MixtureQuasiConcavityCheck(PropertyCheck):
    """Lambda-ES of a mixture is at least the smaller of the two values."""

    name = "mixture_quasi_concavity"

    def __init__(self, lam: BaseLambda | None = None):
        self.lam = lam

    def default_trials(self) -> int:
        return settings.quasi_convexity_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for k in range(trials):
            f, g = random_law(rng), random_law(rng)
            gamma = 1.0 if k % 50 == 0 else float(rng.uniform())
            lam = self.lam or random_lambda(rng)
            mixed = mixture(f, g, gamma)
            rf, rg, rm = _es_value(f, lam), _es_value(g, lam), _es_value(mixed, lam)
            tally.record(
                _leq(min(rf, rg), rm),
                lambda: {"lambda": _spec(lam), "gamma": gamma, "F": _law(f), "G": _law(g),
                         "values": [rf, rg, rm]},
            )
        return self._report(tally)


class SSDConsistencyCheck(PropertyCheck):
    """Increasing convex dominance implies a larger Lambda-ES."""

    name = "ssd_consistency"

    def __init__(self, lam: BaseLambda | None = None):
        self.lam = lam

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        mismatches: list[str] = []
        for _ in range(trials):
            smaller = random_discrete(rng)
            larger = smaller
            for _ in range(int(rng.integers(0, 4))):
                larger = mean_preserving_spread(larger, rng)
            if not icx_dominates(larger, smaller):
                mismatches.append(f"spread generator broke the icx order for {_law(smaller)}")
                continue
            lam = self.lam or random_lambda(rng)
            rl, rs = _es_value(larger, lam), _es_value(smaller, lam)
            tally.record(
                _leq(rs, rl),
                lambda: {"lambda": _spec(lam), "X": _law(larger), "Y": _law(smaller), "values": [rl, rs]},
            )
        return self._report(tally, mismatches=mismatches[:5])


class L1ContinuityCheck(PropertyCheck):
    """
    |Lambda-ES(X + Z/n) - Lambda-ES(X)| stays below E|Z| / (n (1 - sup Lambda)).

    Only meaningful when sup Lambda < 1; a fixed Lambda reaching 1 skips the check.
    """

    name = "l1_continuity"

    def __init__(self, lam: BaseLambda | None = None, perturbation: str = "uniform"):
        self.lam = lam
        self.perturbation = perturbation

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        if self.lam is not None and self.lam.limit_at_neg_inf >= 1.0:
            return PropertyReport(
                name=self.name,
                skipped_reason="Lambda reaches 1, so Lambda-ES is not L1-continuous",
            )
        tally = _Tally()
        worst_ratio = 0.0
        last_gap = 0.0
        length = settings.l1_sequence_length
        for _ in range(trials):
            lam = self.lam or random_lambda(rng, below_one=True)
            vector = random_vector(rng, 8, names=("X",))
            if self.perturbation == "two_point":
                z = rng.choice([-1.0, 1.0], size=vector.size)
            else:
                z = np.round(rng.uniform(-1.0, 1.0, vector.size), 6)
            mean_abs = vector.expectation(np.abs(z))
            base = _es_value(vector.law("X"), lam)
            headroom = 1.0 - lam.limit_at_neg_inf
            passed = True
            for n in range(1, length + 1):
                gap = abs(_es_value(vector.law_of(vector.values("X") + z / n), lam) - base)
                envelope = mean_abs / (n * headroom)
                worst_ratio = max(worst_ratio, gap / envelope if envelope > 0 else 0.0)
                if gap > envelope + 1e-6:
                    passed = False
                if n == length:
                    last_gap = max(last_gap, gap)
            tally.record(
                passed,
                lambda: {"lambda": _spec(lam), "probs": list(vector.probs),
                         "X": list(vector.variables["X"]), "Z": z.tolist()},
            )
        return self._report(tally, details={"worst_envelope_ratio": worst_ratio, "largest_final_gap": last_gap})


class NormalizationCheck(PropertyCheck):
    """Lambda-ES of a constant is the constant."""

    name = "normalization"

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            c = float(np.round(rng.uniform(-10.0, 10.0), 6))
            lam = random_lambda(rng)
            if rng.random() < 0.2:
                lam = raised_lambda(lam, rng)
            value = _es_value(DiscreteDistribution.point_mass(c), lam)
            tally.record(_close(value, c), lambda: {"lambda": _spec(lam), "c": c, "value": value})
        return self._report(tally)


class LambdaMonotonicityCheck(PropertyCheck):
    """Lambda <= Lambda' pointwise implies Lambda-ES <= Lambda'-ES."""

    name = "lambda_monotonicity"

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng)
            higher = raised_lambda(lam, rng)
            low, high = _es_value(dist, lam), _es_value(dist, higher)
            tally.record(
                _leq(low, high),
                lambda: {"lambda": _spec(lam), "raised": _spec(higher), "law": _law(dist), "values": [low, high]},
            )
        return self._report(tally)


class DominanceCheck(PropertyCheck):
    """ES dominates VaR at a fixed level and Lambda-ES dominates Lambda-VaR."""

    name = "dominance"

    def __init__(self, lam: BaseLambda | None = None):
        self.lam = lam

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            alpha = float(rng.uniform())
            lam = self.lam or random_lambda(rng)
            es_alpha = es(dist, alpha)
            les = _es_value(dist, lam)
            lvar = lambda_var(dist, lam)
            passed = _leq(var_left(dist, alpha), es_alpha) and _leq(var_right(dist, alpha), es_alpha)
            passed = passed and _leq(lvar, les)
            lvar_plus = None
            if lam.limit_at_neg_inf < 1.0:
                lvar_plus = lambda_var_right(dist, lam)
                passed = passed and _leq(lvar_plus, les)
            tally.record(
                passed,
                lambda: {"lambda": _spec(lam), "law": _law(dist), "alpha": alpha, "es": es_alpha,
                         "lambda_es": les, "lambda_var": lvar, "lambda_var_right": lvar_plus},
            )
        return self._report(tally)


class FinitenessCheck(PropertyCheck):
    """E[X] <= Lambda-ES(X) <= ess-sup(X) and the finiteness verdict."""

    name = "finiteness_bounds"

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng)
            value = _es_value(dist, lam)
            passed = (
                lambda_es_is_finite(dist, lam)
                and _leq(dist.mean, value)
                and _leq(value, es(dist, 1.0))
            )
            tally.record(passed, lambda: {"lambda": _spec(lam), "law": _law(dist), "value": value})
        return self._report(tally)


# Representations and computation paths


class RepresentationIdentityCheck(PropertyCheck):
    """Sup and inf forms of Lambda-VaR, Lambda-VaR+ and Lambda-ES agree, and the certificate holds."""

    name = "representation_identity"

    def default_trials(self) -> int:
        return settings.equivalence_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng)
            direct = lambda_var(dist, lam)
            direct_plus = lambda_var_right(dist, lam)
            forms = {
                "var_sup": lambda_var_sup_form(dist, lam),
                "var_inf": lambda_var_inf_form(dist, lam),
                "var_plus_sup": lambda_var_sup_form(dist, lam, upper=True),
                "var_plus_inf": lambda_var_inf_form(dist, lam, upper=True),
            }
            value, certificate = lambda_es(dist, lam)
            inf_form = lambda_es_inf_form(dist, lam)
            passed = (
                _close(forms["var_sup"], direct)
                and _close(forms["var_inf"], direct)
                and _close(forms["var_plus_sup"], direct_plus)
                and _close(forms["var_plus_inf"], direct_plus)
                and _close(value, inf_form)
                and certificate.holds()
            )
            tally.record(
                passed,
                lambda: {"lambda": _spec(lam), "law": _law(dist), "lambda_var": direct,
                         "lambda_var_right": direct_plus, **forms, "lambda_es": value,
                         "lambda_es_inf": inf_form, "certificate": certificate.model_dump()},
            )
        return self._report(tally)


class RUEquivalenceCheck(PropertyCheck):
    """min over (a, x) of T equals Lambda-ES for right-continuous Lambda."""

    name = "ru_equivalence"

    def default_trials(self) -> int:
        return settings.equivalence_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng, right_continuous=True)
            result = minimize_t(dist, lam)
            value = _es_value(dist, lam)
            level = lam.eval(result.x_star)
            if level < 1.0:
                in_argmin = _leq(var_left(dist, level), result.a_star) and _leq(result.a_star, var_right(dist, level))
            else:
                in_argmin = result.a_star == dist.ess_sup
            tally.record(
                _close(result.value, value, 1e-9) and in_argmin,
                lambda: {"lambda": _spec(lam), "law": _law(dist), "minimum": result._asdict(), "lambda_es": value},
            )
        return self._report(tally)


class ESSelfConsistencyCheck(PropertyCheck):
    """The integral form of ES equals its Rockafellar-Uryasev form on a level grid."""

    name = "es_self_consistency"

    def default_trials(self) -> int:
        return max(1, settings.property_trials // 5)

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        levels = [k / 100 for k in range(100)] + [1.0]
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            bad = next(
                (a for a in levels if not _close(es(dist, a), es_ru(dist, a).value, 1e-9)),
                None,
            )
            tally.record(
                bad is None,
                lambda: {"law": _law(dist), "alpha": bad, "es": es(dist, bad), "es_ru": es_ru(dist, bad).value},
            )
        return self._report(tally, details={"levels": len(levels)})


class BisectionAgreementCheck(PropertyCheck):
    """The crossing path and the bisection path of Lambda-ES agree."""

    name = "bisection_agreement"

    def default_trials(self) -> int:
        return settings.equivalence_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng)
            exact = _es_value(dist, lam)
            bisected = lambda_es_bisection(dist, lam)
            tally.record(
                _close(exact, bisected, 1e-8),
                lambda: {"lambda": _spec(lam), "law": _law(dist), "exact": exact, "bisection": bisected},
            )
        return self._report(tally)


class TailInvarianceCheck(PropertyCheck):
    """With Lambda >= alpha, lowering the quantiles below alpha leaves Lambda-ES unchanged."""

    name = "tail_invariance"

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_discrete(rng)
            alpha = float(rng.uniform(0.1, 0.8))
            if rng.random() < 0.5:
                lam: BaseLambda = ConstantLambda(alpha=float(rng.uniform(alpha, 0.99)))
            else:
                lam = random_step_lambda(rng, floor=alpha)
            cum = np.cumsum(dist.probs)
            drop = float(np.round(rng.uniform(0.1, 5.0), 6))
            atoms = [a - drop if c <= alpha else a for a, c in zip(dist.atoms, cum)]
            lowered = DiscreteDistribution(atoms=atoms, probs=dist.probs)
            try:
                invariant = is_tail_measure_invariant(dist, lam, alpha, lowered)
            except PreconditionError:
                invariant = False
            tally.record(
                invariant,
                lambda: {"lambda": _spec(lam), "alpha": alpha, "law": _law(dist), "lowered": _law(lowered)},
            )
        return self._report(tally)


# Dual representation


class DualBoundCheck(PropertyCheck):
    """R(E_Q[X], Q) <= Lambda-ES(X) for random Q; the witness attains equality."""

    name = "dual_bound"

    def default_trials(self) -> int:
        return settings.dual_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        attainment_failures = 0
        r_failures = 0
        per_vector = 100
        for start in range(0, trials, per_vector):
            vector = random_vector(rng, 20, names=("X",))
            lam = random_lambda(rng)
            x = vector.values("X")
            rhs = _es_value(vector.law("X"), lam)
            for _ in range(min(per_vector, trials - start)):
                q = random_measure_change(rng, vector.probs)
                lhs = r_function(q.expectation(x), q, lam)
                tally.record(
                    _leq(lhs, rhs),
                    lambda: {"lambda": _spec(lam), "probs": list(vector.probs), "X": x.tolist(),
                             "Q": list(q.alt_probs), "lhs": lhs, "rhs": rhs},
                )
            identity = dual_lower_bound_check(vector, lam, MeasureChange.identity(vector.probs))
            if not identity.ok:
                attainment_failures += 1
            if lam.is_left_continuous():
                witness = witness_supremum(vector, lam)
                attained = r_function(witness.expectation(x), witness, lam)
                if not _close(attained, rhs, 1e-8):
                    attainment_failures += 1
                    logger.debug("Dual witness reaches %.17g instead of %.17g", attained, rhs)
            grid = np.linspace(x.min() - 2.0, x.max() + 2.0, 41)
            if not r_properties_check(q, lam, grid).ok:
                r_failures += 1
        report = self._report(tally, details={"witness_failures": attainment_failures, "r_property_failures": r_failures})
        report.failures += attainment_failures + r_failures
        return report


def rewrite_agrees(dist: Distribution, lam: BaseLambda, ell: float) -> tuple[bool | None, float, float]:
    """Whether both sides of the constraint rewrite agree at ``ell``; None on a near tie."""
    value = _es_value(dist, lam)
    rewritten = es(dist, constraint_rewrite(lam, ell))
    if _close(value, ell) or _close(rewritten, ell):
        return None, value, rewritten
    return (value <= ell) == (rewritten <= ell), value, rewritten


class ConstraintRewriteCheck(PropertyCheck):
    """Lambda-ES(Y) <= l  iff  ES at level Lambda(l) of Y is <= l."""

    name = "constraint_rewrite"

    def default_trials(self) -> int:
        return settings.equivalence_trials

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        near_ties = 0
        for _ in range(trials):
            dist = random_law(rng)
            lam = random_lambda(rng, right_continuous=True)
            ell = float(np.round(rng.uniform(dist.mean - 1.0, dist.ess_sup + 1.0), 6))
            agrees, value, rewritten = rewrite_agrees(dist, lam, ell)
            if agrees is None:
                near_ties += 1
                continue
            tally.record(
                agrees,
                lambda: {"lambda": _spec(lam), "law": _law(dist), "ell": ell,
                         "lambda_es": value, "rewritten_es": rewritten},
            )
        return self._report(tally, details={"near_ties": near_ties})


# Optimisation


class ConvexityRegimeCheck(PropertyCheck):
    """Joint convexity of T, convexity in x against 1/(1 - Lambda), and the quasi-convexity gap."""

    name = "convexity_regime"

    def default_trials(self) -> int:
        return max(1, settings.property_trials // 20)

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        for _ in range(trials):
            dist = random_discrete(rng)
            lam = random_lambda(rng)
            report = convexity_regime_report(lam, dist, trials=50, rng=rng)
            tally.record(report.ok, lambda: {"lambda": _spec(lam), "law": _law(dist), "report": report.model_dump()})
        return self._report(tally)


class PortfolioConsistencyCheck(PropertyCheck):
    """LP optima agree with direct evaluation of the optimal portfolio."""

    name = "portfolio_consistency"

    def default_trials(self) -> int:
        return max(1, settings.equivalence_trials // 10)

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        tally = _Tally()
        simplex = SimplexSet()
        for _ in range(trials):
            losses = np.round(rng.normal(0.0, 2.0, (10, 3)), 4)
            scenarios = ScenarioMatrix(losses=losses.tolist(), probs=random_probs(rng, 10).tolist())
            alpha = float(rng.uniform(0.0, 0.95))
            lp = cvar_lp(scenarios, alpha, simplex)
            direct = es(DiscreteDistribution(atoms=portfolio_losses(scenarios, lp.theta), probs=scenarios.probs), alpha)
            feasible = abs(sum(lp.theta) - 1.0) <= 1e-8 and min(lp.theta) >= -1e-8

            lam = random_lambda(rng, right_continuous=True)
            best = min_portfolio_lambda_es(scenarios, lam, simplex)
            at_best = _es_value(
                DiscreteDistribution(atoms=portfolio_losses(scenarios, best.theta), probs=scenarios.probs), lam
            )
            golden_ok = best.golden_section_value is None or _close(best.golden_section_value, best.value, 1e-6)
            probe = random_probs(rng, 3)
            at_probe = _es_value(
                DiscreteDistribution(atoms=portfolio_losses(scenarios, probe), probs=scenarios.probs), lam
            )
            passed = (
                feasible
                and _close(lp.value, direct, 1e-7)
                and _close(best.value, at_best, 1e-6)
                and golden_ok
                and _leq(best.value, at_probe, 1e-6)
            )
            tally.record(
                passed,
                lambda: {"lambda": _spec(lam), "alpha": alpha, "losses": losses.tolist(),
                         "probs": list(scenarios.probs), "cvar_lp": lp.value, "direct_es": direct,
                         "lambda_es_optimum": best.value, "at_optimum": at_best, "at_probe": at_probe},
            )
        return self._report(tally)


# Separation from ES


def _pinned_convexity_triple() -> tuple[StepLambda, DiscreteDistribution, DiscreteDistribution, DiscreteDistribution]:
    lam = StepLambda(breaks=(1.0, 1.5), values=(0.9, 0.5, 0.2), side="right")
    x = DiscreteDistribution.from_mapping({0.0: 0.5, 2.0: 0.5})
    y = DiscreteDistribution.point_mass(0.0)
    mid = DiscreteDistribution.from_mapping({0.0: 0.5, 1.0: 0.5})
    return lam, x, y, mid


def _probe_pairs(lam: BaseLambda, before: float, after: float) -> list[tuple[float, float]]:
    """(y, x) pairs with y < x straddling the breakpoints, then grid neighbours."""
    pairs = []
    for b in lam.breakpoints():
        delta = 1e-3 * max(1.0, abs(b))
        pairs.append((b - before * delta, b + after * delta))
    grid = lam.default_probe_grid()
    pairs.extend((float(grid[i]), float(grid[i + 2])) for i in range(len(grid) - 2))
    return pairs


def convexity_counterexample(lam: BaseLambda) -> dict[str, Any] | None:
    """
    Two-point X and constant Y with Lambda-ES((X+Y)/2) above the average of the two values.

    Needs x > y with Lambda(x-) < Lambda((x+y)/2) < 1.
    """
    for y, x in _probe_pairs(lam, 3.0, 1.0):
        mid = 0.5 * (x + y)
        level = lam.eval(mid)
        if not lam.left_limit(x) < level < 1.0:
            continue
        rx = _es_value(DiscreteDistribution(atoms=[y, x], probs=[level, 1.0 - level]), lam)
        ry = _es_value(DiscreteDistribution.point_mass(y), lam)
        rm = _es_value(DiscreteDistribution(atoms=[y, mid], probs=[level, 1.0 - level]), lam)
        if rm > 0.5 * (rx + ry) + settings.measure_tolerance * _scale(rm):
            return {"x": x, "y": y, "level": level, "values": [rx, ry, rm]}
    return None


def mixture_concavity_counterexample(lam: BaseLambda, max_doublings: int = 60) -> dict[str, Any] | None:
    """
    Laws X, Y and a gamma-mixture Z with Lambda-ES(Z) below the mixture of the values.

    Needs x > y, z = (x + y)/2 with Lambda(z) below the chord of Lambda and Lambda(y) < 1.
    The loss -K on the complements is doubled until ES at level Lambda(z) of Z is <= z.
    """
    theta = 0.5
    for y, x in _probe_pairs(lam, 1.0, 3.0):
        z = theta * x + (1.0 - theta) * y
        p, q, level = lam.eval(x), lam.eval(y), lam.eval(z)
        margin = theta * p + (1.0 - theta) * q - level
        if margin <= 0.0 or q >= 1.0:
            continue
        step = 0.5 * (1.0 - theta) if q == p else min(0.5 * margin / (q - p), 0.5 * (1.0 - theta))
        gamma = theta + step
        k = max(-x, -y) + 1.0
        for _ in range(max_doublings):
            law_x = DiscreteDistribution(atoms=[-k, x], probs=[p, 1.0 - p]) if p > 0 else DiscreteDistribution.point_mass(x)
            law_y = DiscreteDistribution(atoms=[-k, y], probs=[q, 1.0 - q]) if q > 0 else DiscreteDistribution.point_mass(y)
            law_z = mixture(law_x, law_y, gamma)
            if es(law_z, level) <= z:
                break
            k *= 2.0
        else:
            continue
        rx, ry, rz = _es_value(law_x, lam), _es_value(law_y, lam), _es_value(law_z, lam)
        logger.debug("Mixture counterexample at K = %.6g", k)
        if rz < gamma * rx + (1.0 - gamma) * ry - settings.measure_tolerance * _scale(rz):
            return {"x": x, "y": y, "z": z, "gamma": gamma, "K": k, "values": [rx, ry, rz]}
    return None


class ConvexityFailureCheck(PropertyCheck):
    """
    Lambda-ES is neither convex nor concave in mixtures unless Lambda is constant.

    Reproduces the pinned step example, builds both constructions for random
    non-constant Lambda, and searches for violations under constant Lambda as
    a control.
    """

    name = "convexity_failure"
    expect_failures = True

    def __init__(self, control_trials: int | None = None):
        self.control_trials = settings.control_trials if control_trials is None else control_trials

    def default_trials(self) -> int:
        return max(1, settings.property_trials // 10)

    def run(self, rng: np.random.Generator, trials: int) -> PropertyReport:
        mismatches: list[str] = []
        lam, x, y, mid = _pinned_convexity_triple()
        values = [_es_value(d, lam) for d in (x, y, mid)]
        for got, expected, label in zip(values, (1.5, 0.0, 1.0), ("X", "Y", "(X+Y)/2")):
            if not _close(got, expected, 1e-9):
                mismatches.append(f"Lambda-ES({label}) = {got!r}, expected {expected!r}")
        pinned_violation = 0.5 * (values[0] + values[1]) < values[2]
        if not _leq(values[2], max(values[0], values[1])):
            mismatches.append("quasi-convexity fails on the pinned triple")
        failures = int(pinned_violation)

        convex_found = mixture_found = 0
        for _ in range(trials):
            step = random_step_lambda(rng, side="right")
            if convexity_counterexample(step) is not None:
                convex_found += 1
            if mixture_concavity_counterexample(step) is not None:
                mixture_found += 1
        failures += convex_found + mixture_found

        control_violations = 0
        for _ in range(self.control_trials):
            constant = ConstantLambda(alpha=float(rng.uniform(0.0, 0.99)))
            vector = random_vector(rng, 6)
            mid_values = 0.5 * (vector.values("X") + vector.values("Y"))
            rx = _es_value(vector.law("X"), constant)
            ry = _es_value(vector.law("Y"), constant)
            rm = _es_value(vector.law_of(mid_values), constant)
            if not _leq(rm, 0.5 * (rx + ry)):
                control_violations += 1
        if control_violations:
            mismatches.append(f"{control_violations} convexity violations under constant Lambda")

        return PropertyReport(
            name=self.name,
            trials=1 + 2 * trials,
            failures=failures,
            witness={"lambda": _spec(lam), "X": _law(x), "Y": _law(y), "midpoint": _law(mid), "values": values},
            expect_failures=True,
            mismatches=mismatches,
            details={
                "pinned_gap": values[2] - 0.5 * (values[0] + values[1]),
                "convexity_counterexamples": convex_found,
                "mixture_counterexamples": mixture_found,
                "random_step_lambdas": trials,
                "control_trials": self.control_trials,
                "example_mixture": mixture_concavity_counterexample(lam),
            },
        )


# Entry points with the names used by the command line and the tests


def _run(check: PropertyCheck, trials: int | None, seed: int | None) -> PropertyReport:
    seed = settings.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    report = check.run(rng, check.default_trials() if trials is None else trials)
    report.seed = seed
    return report


def check_monotonicity(measure: str = "lambda_es", trials: int | None = None, seed: int | None = None) -> PropertyReport:
    return _run(MonotonicityCheck(measure), trials, seed)


def check_cash_subadditivity(
    lam: BaseLambda | None = None, trials: int | None = None, seed: int | None = None
) -> PropertyReport:
    return _run(CashSubadditivityCheck(lam), trials, seed)


def check_quasi_convexity(
    lam: BaseLambda | None = None, trials: int | None = None, seed: int | None = None
) -> PropertyReport:
    return _run(QuasiConvexityCheck(lam), trials, seed)


def check_mixture_quasi_concavity(
    lam: BaseLambda | None = None, trials: int | None = None, seed: int | None = None
) -> PropertyReport:
    return _run(MixtureQuasiConcavityCheck(lam), trials, seed)


def check_ssd_consistency(
    lam: BaseLambda | None = None, trials: int | None = None, seed: int | None = None
) -> PropertyReport:
    return _run(SSDConsistencyCheck(lam), trials, seed)


def check_l1_continuity(
    lam: BaseLambda | None = None,
    perturbation: str = "uniform",
    trials: int | None = None,
    seed: int | None = None,
) -> PropertyReport:
    return _run(L1ContinuityCheck(lam, perturbation), trials, seed)


def check_dominance(lam: BaseLambda | None = None, trials: int | None = None, seed: int | None = None) -> PropertyReport:
    return _run(DominanceCheck(lam), trials, seed)


def check_convexity_failure(
    trials: int | None = None, control_trials: int | None = None, seed: int | None = None
) -> PropertyReport:
    return _run(ConvexityFailureCheck(control_trials), trials, seed)
