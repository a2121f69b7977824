"""Shared utility functions."""

import math
import os
import tempfile
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np

from src.config import settings

# Risk measures take values in [-inf, +inf]; plain floats carry them.
ExtendedReal = float


def safe_divide(numerator: float, denominator: float) -> ExtendedReal:
    """
    Divide with the conventions 0/0 = 0 and x/0 = +inf for x > 0.

    Args:
        numerator: Nonnegative numerator (a stop-loss or a mass)
        denominator: Nonnegative denominator (one minus a level)

    Returns:
        The quotient under the extended-real conventions
    """
    if denominator > 0:
        return numerator / denominator
    if numerator == 0:
        return 0.0
    return math.inf if numerator > 0 else -math.inf


def first_true(
    predicate: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float | None = None,
) -> float:
    """
    Locate inf{x in (lo, hi] : predicate(x)} for a predicate that flips once.

    The predicate must be False at lo and True at hi; the bracket is halved
    until its width drops below ``tol`` or floating point stops it.

    Args:
        predicate: Monotone predicate (False then True)
        lo: Point where the predicate is False
        hi: Point where the predicate is True
        tol: Absolute bracket width; defaults to machine resolution

    Returns:
        Upper end of the final bracket
    """
    width = 0.0 if tol is None else tol
    for _ in range(settings.bisection_max_iterations):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def last_true(
    predicate: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float | None = None,
) -> float:
    """Locate sup{x in [lo, hi) : predicate(x)} for a predicate that is True then False."""
    width = 0.0 if tol is None else tol
    for _ in range(settings.bisection_max_iterations):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo


def is_midpoint_convex(
    func: Callable[[float], float],
    grid: np.ndarray,
    tol: float = 1e-10,
) -> tuple[bool, tuple[float, float] | None]:
    """
    Check f((x+y)/2) <= (f(x)+f(y))/2 on every pair of grid points.

    Args:
        func: Function of one real variable
        grid: Probe points
        tol: Relative slack

    Returns:
        Verdict and the first violating pair, if any
    """
    points = np.sort(np.asarray(grid, dtype=float))
    values = [func(float(x)) for x in points]
    for i in range(len(points)):
        for j in range(i + 2, len(points)):
            mid = func(0.5 * (points[i] + points[j]))
            chord = 0.5 * (values[i] + values[j])
            if mid > chord + tol * (1.0 + abs(chord)):
                return False, (float(points[i]), float(points[j]))
    return True, None


def format_real(value: float) -> str:
    """Format a number with 17 significant digits; infinities as 'inf' / '-inf'."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def to_json_value(value: Any) -> Any:
    """
    Prepare a value for JSON output.

    Floats are rounded through 17 significant digits and infinities become
    strings; containers are converted recursively.
    """
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value) or math.isnan(value):
            return format_real(value) if not math.isnan(value) else "nan"
        return float(format(value, ".17g"))
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {str(k): to_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_json_value(v) for v in value]
    return value


def parse_real(text: str) -> float:
    """Parse a number written by ``format_real``."""
    token = text.strip().lower()
    if token in {"inf", "+inf"}:
        return math.inf
    if token == "-inf":
        return -math.inf
    return float(token)


def write_atomic(path: Path, text: str) -> None:
    """Write text to ``path`` through a temporary file and an atomic rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
