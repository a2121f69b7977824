"""Random laws, Lambda specs, random vectors and measure changes for property sweeps."""

import numpy as np

from src.risk.dist import (
    DiscreteDistribution,
    Distribution,
    PiecewiseLinearQuantileDistribution,
    RandomVector,
)
from src.risk.dual import MeasureChange
from src.risk.lambdas import (
    BaseLambda,
    ClampedLinearLambda,
    ConstantLambda,
    LogisticLambda,
    StepLambda,
)


def random_probs(rng: np.random.Generator, size: int) -> np.ndarray:
    """Dirichlet(1, ..., 1) probabilities, renormalised to sum to 1 exactly in floating point."""
    probs = rng.dirichlet(np.ones(size))
    probs = np.maximum(probs, 1e-6)
    return probs / probs.sum()


def random_discrete(
    rng: np.random.Generator,
    max_atoms: int = 8,
    scale: float = 5.0,
) -> DiscreteDistribution:
    size = int(rng.integers(1, max_atoms + 1))
    atoms = np.round(rng.uniform(-scale, scale, size), 6)
    return DiscreteDistribution(atoms=atoms, probs=random_probs(rng, size))


def random_piecewise_linear(
    rng: np.random.Generator,
    max_segments: int = 5,
    scale: float = 5.0,
) -> PiecewiseLinearQuantileDistribution:
    size = int(rng.integers(1, max_segments + 1))
    cuts = np.concatenate([[0.0], np.cumsum(random_probs(rng, size))])
    cuts[-1] = 1.0
    values = np.sort(np.round(rng.uniform(-scale, scale, 2 * size), 6))
    # every other segment is flat, so atoms and continuous pieces are both exercised
    segments = []
    for k in range(size):
        lo, hi = values[2 * k], values[2 * k + 1]
        if k % 2 == 1 and rng.random() < 0.5:
            hi = lo
        segments.append((cuts[k], cuts[k + 1], lo, hi))
    return PiecewiseLinearQuantileDistribution(segments=segments)


def random_law(rng: np.random.Generator) -> Distribution:
    """Discrete or piecewise-linear law with equal odds."""
    if rng.random() < 0.5:
        return random_discrete(rng)
    return random_piecewise_linear(rng)


def random_step_lambda(
    rng: np.random.Generator,
    side: str | None = None,
    floor: float = 0.0,
    cap: float = 0.99,
    scale: float = 5.0,
) -> StepLambda:
    """Step Lambda with values in [floor, cap]."""
    count = int(rng.integers(1, 5))
    breaks = np.sort(np.round(rng.uniform(-scale, scale, count), 6))
    breaks = np.unique(breaks)
    values = np.sort(rng.uniform(floor, cap, breaks.size + 1))[::-1]
    chosen_side = side if side is not None else str(rng.choice(["left", "right"]))
    return StepLambda(breaks=tuple(breaks.tolist()), values=tuple(values.tolist()), side=chosen_side)


def random_lambda(
    rng: np.random.Generator,
    right_continuous: bool = False,
    left_continuous: bool = False,
    below_one: bool = False,
) -> BaseLambda:
    """
    Any of the four variants.

    Args:
        rng: Random generator
        right_continuous: Restrict step specs to right-continuous ones
        left_continuous: Restrict step specs to left-continuous ones
        below_one: Keep sup Lambda strictly below 1
    """
    cap = 0.95 if below_one else 1.0
    kind = int(rng.integers(4))
    if kind == 0:
        return ConstantLambda(alpha=float(rng.uniform(0.0, cap if below_one else 0.99)))
    if kind == 1:
        side = "right" if right_continuous else "left" if left_continuous else None
        return random_step_lambda(rng, side=side, cap=min(cap, 0.99))
    if kind == 2 and not below_one:
        return LogisticLambda(a=float(rng.uniform(0.2, 4.0)))
    floor = float(rng.uniform(0.0, 0.5))
    return ClampedLinearLambda(
        slope=-float(rng.uniform(0.05, 1.0)),
        intercept=float(rng.uniform(0.2, 0.9)),
        floor=floor,
        cap=float(rng.uniform(max(floor, 0.6), cap)),
    )


def raised_lambda(lam: BaseLambda, rng: np.random.Generator) -> BaseLambda:
    """A Lambda pointwise at least ``lam``."""
    if isinstance(lam, ConstantLambda):
        return ConstantLambda(alpha=float(rng.uniform(lam.alpha, 1.0)))
    if isinstance(lam, StepLambda):
        bump = float(rng.uniform(0.0, 0.3))
        return lam.model_copy(update={"values": tuple(min(1.0, v + bump) for v in lam.values)})
    if isinstance(lam, ClampedLinearLambda):
        bump = float(rng.uniform(0.0, 0.3))
        return lam.model_copy(
            update={
                "intercept": lam.intercept + bump,
                "floor": min(lam.cap, lam.floor + bump),
            }
        )
    # 1/(exp(a x) + 1) increases pointwise on x < 0 and decreases on x > 0 as a grows,
    # so a logistic spec is raised by a constant spec at its supremum.
    return ConstantLambda(alpha=1.0)


def random_vector(
    rng: np.random.Generator,
    size: int,
    names: tuple[str, ...] = ("X", "Y"),
    scale: float = 5.0,
) -> RandomVector:
    """Independent rounded uniform variables on a sample space of ``size`` points."""
    variables = {name: tuple(np.round(rng.uniform(-scale, scale, size), 6).tolist()) for name in names}
    return RandomVector(probs=tuple(random_probs(rng, size).tolist()), variables=variables)


def random_measure_change(rng: np.random.Generator, probs: tuple[float, ...]) -> MeasureChange:
    """Random Q on the support of P, with some points given zero mass."""
    size = len(probs)
    alt = rng.dirichlet(np.full(size, 0.5))
    if size > 1:
        alt[rng.random(size) < 0.3] = 0.0
        if alt.sum() == 0.0:
            alt[int(rng.integers(size))] = 1.0
    alt = alt / alt.sum()
    return MeasureChange(base_probs=probs, alt_probs=tuple(alt.tolist()))


def mean_preserving_spread(dist: DiscreteDistribution, rng: np.random.Generator) -> DiscreteDistribution:
    """Split one atom into two equally likely atoms with the same mean."""
    k = int(rng.integers(len(dist.atoms)))
    width = float(rng.uniform(0.1, 3.0))
    atoms = list(dist.atoms) + [dist.atoms[k] - width, dist.atoms[k] + width]
    probs = list(dist.probs) + [0.5 * dist.probs[k], 0.5 * dist.probs[k]]
    del atoms[k], probs[k]
    return DiscreteDistribution(atoms=atoms, probs=probs)
