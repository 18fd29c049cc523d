"""
Closed-form low-p expressions p_L(d, p) = C (R p)^(d/2) from analytic
coefficients, and asymptotic coefficients from simulated error rates.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from nestline.errors import FitError, MissingDistanceError

logger = logging.getLogger(__name__)

VALIDITY_LIMIT = 1e-4
RELATIVE_TOLERANCE = 1e-12


class ValidityWarning(UserWarning):
    """The physical error rate is above the range where the leading-order expression holds."""


@dataclass(frozen=True)
class AsymptoticExpression:
    cls: str
    C: float
    R: float
    distances: tuple[int, ...]
    note: str = f"valid for p <= {VALIDITY_LIMIT:g}"

    def render(self, digits: int = 2) -> str:
        return f"{self.C:.{digits}g} ({self.R:.{digits}g} p)^(d/2)"

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "C": self.C,
            "R": self.R,
            "distances": list(self.distances),
            "expression": self.render(),
            "note": self.note,
        }


@dataclass(frozen=True)
class SimAsymptote:
    d: int
    A: float
    stderr: float
    converged: bool
    used: tuple[tuple[float, float, float], ...] = field(default=())


def _coefficient(value) -> float:
    return float(Fraction(value)) if isinstance(value, (Fraction, int)) else float(value)


def fit_expression(B: Mapping[int, object], pair: tuple[int, int] | None = None, cls: str = "") -> AsymptoticExpression:
    """
    Fit C and R from the coefficients of two successive even distances.

    Args:
        B: Coefficient per even distance
        pair: (d, d+2), defaults to the two smallest distances
        cls: Class label carried into the expression

    Returns:
        AsymptoticExpression: R = B(d+2)/B(d), C = B(d)/R^(d/2)
    """
    if pair is None:
        distances = sorted(B)
        if len(distances) < 2:
            raise MissingDistanceError(f"need coefficients for two distances, got {distances}")
        pair = (distances[0], distances[1])
    low, high = pair
    for d in pair:
        if d not in B:
            raise MissingDistanceError(f"no coefficient for distance {d}")
    if high != low + 2 or low % 2:
        raise FitError(f"distances must be successive even values, got {pair}")
    b_low, b_high = _coefficient(B[low]), _coefficient(B[high])
    if b_low <= 0 or b_high <= 0:
        raise FitError("coefficients must be positive to fit an exponential")
    R = b_high / b_low
    C = b_low / R ** (low // 2)
    return AsymptoticExpression(cls, C, R, (low, high))


def fit_least_squares(B: Mapping[int, object], cls: str = "") -> AsymptoticExpression:
    """Straight-line fit of log B(d) against d/2 over every available even distance."""
    distances = sorted(d for d in B if _coefficient(B[d]) > 0)
    if len(distances) < 2:
        raise MissingDistanceError(f"need coefficients for two distances, got {distances}")
    half = np.array([d / 2 for d in distances])
    logs = np.log([_coefficient(B[d]) for d in distances])
    slope, intercept = np.polyfit(half, logs, 1)
    return AsymptoticExpression(cls, float(np.exp(intercept)), float(np.exp(slope)), tuple(distances))


def eval_pL(e: AsymptoticExpression, d: int, p: float) -> float:
    if d % 2:
        raise ValueError(f"distance must be even, got {d}")
    if p > VALIDITY_LIMIT:
        warnings.warn(f"p={p:g} is above {VALIDITY_LIMIT:g}; the expression is leading order only",
                      ValidityWarning, stacklevel=2)
    return e.C * (e.R * p) ** (d // 2)


def _agree(a: tuple[float, float], b: tuple[float, float]) -> bool:
    (x, sx), (y, sy) = a, b
    return abs(x - y) <= max(math.hypot(sx, sy), RELATIVE_TOLERANCE * max(abs(x), abs(y)))


def extract_sim_asymptote(points: Sequence[tuple[float, float, float]], d: int) -> SimAsymptote:
    """
    Coefficient A of p^(d/2) from the lowest-p points whose ratios have settled.

    Points are (p, p_L, stderr). Starting from the lowest p, points are taken
    while each ratio p_L/p^(d/2) agrees with the previous one within their
    combined standard error; the accepted ratios are averaged with inverse
    variance weights.
    """
    usable = sorted((p, pl, se) for p, pl, se in points if p > 0)
    if not usable:
        raise FitError("no data point with p > 0")
    half = d / 2
    ratios = [(pl / p ** half, se / p ** half) for p, pl, se in usable]

    taken = 1
    while taken < len(ratios) and _agree(ratios[taken - 1], ratios[taken]):
        taken += 1
    converged = taken >= 2
    if not converged:
        logger.info("d=%d: lowest-p ratios have not settled", d)

    accepted = ratios[:taken]
    errors = np.array([se for _, se in accepted])
    values = np.array([r for r, _ in accepted])
    if np.any(errors == 0):
        A, stderr = float(values.mean()), 0.0
    else:
        weights = 1 / errors ** 2
        A = float(np.sum(weights * values) / np.sum(weights))
        stderr = float(1 / math.sqrt(np.sum(weights)))
    return SimAsymptote(d, A, stderr, converged, tuple(usable[:taken]))
