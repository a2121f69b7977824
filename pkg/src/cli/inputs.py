"""Loaders for the flat-file inputs of the command line."""

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from src.config import settings
from src.errors import InvalidInputError
from src.optimization.ru_opt import ScenarioMatrix
from src.risk.dist import DiscreteDistribution, law_of, validate_level
from src.risk.lambdas import LambdaSpec, parse_lambda

logger = logging.getLogger(__name__)


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise InvalidInputError(f"{path} is empty")
    header = [cell.strip().lower() for cell in rows[0]]
    return header, rows[1:]


def _to_float(cell: str, path: Path, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise InvalidInputError(f"{path}:{line}: {cell!r} is not a number") from None
    if not math.isfinite(value):
        raise InvalidInputError(f"{path}:{line}: values must be finite")
    return value


def _normalised(probs: np.ndarray, path: Path) -> np.ndarray:
    if np.any(probs < 0):
        raise InvalidInputError(f"{path}: probabilities must be nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > settings.csv_prob_tolerance:
        raise InvalidInputError(f"{path}: probabilities sum to {total!r}, not 1")
    if total != 1.0:
        logger.debug("Renormalising probabilities of %s (sum %.17g)", path, total)
    return probs / total


def load_distribution_csv(path: Path) -> DiscreteDistribution:
    """
    Load a discrete law from a ``value,prob`` CSV.

    Probabilities within ``settings.csv_prob_tolerance`` of summing to one are
    renormalised; zero-probability rows are dropped.

    Raises:
        FileNotFoundError: the file does not exist
        InvalidInputError: wrong header, non-numeric cells or bad probabilities
    """
    path = Path(path)
    header, rows = _read_rows(path)
    if header != ["value", "prob"]:
        raise InvalidInputError(f"{path}: expected header 'value,prob', got {','.join(header)!r}")
    if not rows:
        raise InvalidInputError(f"{path}: no atoms")
    values, probs = [], []
    for line, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise InvalidInputError(f"{path}:{line}: expected 2 columns, got {len(row)}")
        values.append(_to_float(row[0], path, line))
        probs.append(_to_float(row[1], path, line))
    probs = _normalised(np.asarray(probs), path)
    return law_of(values, probs)


def load_scenarios_csv(path: Path) -> ScenarioMatrix:
    """
    Load a scenario loss matrix from a ``prob,asset_1,...,asset_n`` CSV.

    The ``prob`` column is optional; without it scenarios are equally likely.
    Asset names are taken from the header.

    Raises:
        FileNotFoundError: the file does not exist
        InvalidInputError: ragged rows, non-numeric cells or bad probabilities
    """
    path = Path(path)
    header, rows = _read_rows(path)
    has_prob = bool(header) and header[0] == "prob"
    names = header[1:] if has_prob else header
    if not names:
        raise InvalidInputError(f"{path}: no asset columns")
    if not rows:
        raise InvalidInputError(f"{path}: no scenarios")
    width = len(header)
    losses, probs = [], []
    for line, row in enumerate(rows, start=2):
        if len(row) != width:
            raise InvalidInputError(f"{path}:{line}: expected {width} columns, got {len(row)}")
        cells = [_to_float(cell, path, line) for cell in row]
        if has_prob:
            probs.append(cells[0])
            cells = cells[1:]
        losses.append(cells)
    if has_prob:
        weights = _normalised(np.asarray(probs), path)
        keep = weights > 0
        losses = [row for row, k in zip(losses, keep) if k]
        weights = weights[keep] / math.fsum(weights[keep])
        return ScenarioMatrix(losses=losses, probs=weights.tolist(), asset_names=tuple(names))
    return ScenarioMatrix.uniform(losses, asset_names=names)


def load_lambda_json(path: Path) -> LambdaSpec:
    """Load a Lambda spec from a JSON file discriminated on ``type``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: a Lambda spec must be a JSON object")
    return parse_lambda(data)


def parse_levels(text: str) -> list[float]:
    """Parse ``a,b,c`` into a list of levels in [0, 1]."""
    tokens = [token.strip() for token in text.split(",") if token.strip()]
    if not tokens:
        raise InvalidInputError("no levels given")
    levels = []
    for token in tokens:
        try:
            levels.append(validate_level(float(token)))
        except (ValueError, InvalidInputError) as exc:
            raise InvalidInputError(f"invalid level {token!r}: {exc}") from None
    return levels


def parse_grid(text: str) -> np.ndarray:
    """Parse ``lo:hi:n`` into ``n`` equally spaced points."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInputError(f"grid must read lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InvalidInputError(f"grid must read lo:hi:n, got {text!r}") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise InvalidInputError("grid needs finite lo <= hi and at least one point")
    if n == 1 and hi != lo:
        raise InvalidInputError("a one-point grid needs lo == hi")
    return np.linspace(lo, hi, n)
