"""Dynamical classes A-D in the (f, delta) plane.

The drawn boundaries are

    A | B :  f delta        = g^2 / 3
    B | C :  (f + 1.5 g) delta = g^2
    C | D :  (f - 1.5 g) delta = g^2

A point lying exactly on a boundary goes to the higher class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .model import SystemParams

LABELS = ("A", "B", "C", "D")
DEFAULT_ETA = 0.5
BC_OFFSET = 1.5


@dataclass(frozen=True)
class RegimeClass:
    label: str
    boundary_distances: tuple[float, float, float]

    @property
    def index(self) -> int:
        return LABELS.index(self.label)


def boundary_distances(f: float, delta: float, params: SystemParams) -> tuple[float, float, float]:
    """Signed distances fd - g^2/3, (f+1.5g)d - g^2, (f-1.5g)d - g^2."""
    g2 = params.g ** 2
    off = BC_OFFSET * params.g
    return (f * delta - g2 / 3.0, (f + off) * delta - g2, (f - off) * delta - g2)


def classify(f: float, delta: float, params: SystemParams | None = None) -> RegimeClass:
    if params is None:
        params = SystemParams(1.0, delta)
    if not f > 0:
        raise ConfigError("classification needs f > 0")
    if delta < 0:
        raise ConfigError("classification needs delta >= 0")
    d_ab, d_bc, d_cd = dist = boundary_distances(f, delta, params)
    if d_ab < 0:
        label = "A"
    elif d_bc < 0:
        label = "B"
    elif d_cd < 0:
        label = "C"
    else:
        label = "D"
    return RegimeClass(label, dist)


class ExtremalLambda(NamedTuple):
    value: float
    valid: bool


def min_lambda1(f: float, delta: float, params: SystemParams | None = None) -> ExtremalLambda:
    """Minimum of lambda_1 along z_1(t); defined for delta > g^2 / 8f."""
    g2 = (params.g if params else 1.0) ** 2
    if f <= 0 or delta <= 0:
        return ExtremalLambda(float("nan"), False)
    x = g2 / (f * delta)
    return ExtremalLambda(math.sqrt(1.0 + x) - 0.5 * x, delta > g2 / (8.0 * f))


def max_lambda2(f: float, delta: float, params: SystemParams | None = None) -> ExtremalLambda:
    """Maximum of lambda_2 along z_2(t); defined for f delta >= g^2."""
    g2 = (params.g if params else 1.0) ** 2
    if f <= 0 or delta <= 0:
        return ExtremalLambda(float("nan"), False)
    x = g2 / (f * delta)
    if x > 1.0:
        return ExtremalLambda(float("nan"), False)
    return ExtremalLambda(-(math.sqrt(1.0 - x) + 0.5 * x), True)


def ab_threshold(eta: float = DEFAULT_ETA) -> float:
    """f delta / g^2 above which min lambda_1 > 1 - eta."""
    if not 0 < eta:
        raise ConfigError("eta must be positive")
    return 1.0 / (2.0 * eta + math.sqrt(8.0 * eta))


def phase_diagram(f_values, delta_values, params: SystemParams | None = None) -> np.ndarray:
    """Label grid with shape (len(f_values), len(delta_values))."""
    return np.array([[classify(f, d, params).label for d in delta_values] for f in f_values])
