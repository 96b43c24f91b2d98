"""Quadratic interconnector losses and their market approximations.

The market never sees the constant no-load term ``a0``; both the linear factor
and the piecewise-linear model approximate only the flow-dependent part
``b*|f| + c*f**2``. The constant is charged when losses are settled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import QuadraticLossModel

_FLOW_TOL = 1e-9


def _check_flow(flow: float, p_max: float) -> float:
    a = abs(flow)
    if a > p_max * (1 + _FLOW_TOL):
        raise ValueError(f"flow {flow} MW exceeds rated flow {p_max} MW")
    return min(a, p_max)


def true_loss(model: QuadraticLossModel, flow: float) -> float:
    """Physical loss in MW at signed flow ``flow``."""
    a = _check_flow(flow, model.p_max_mw)
    return model.a0_mw + model.b * a + model.c_per_mw * a * a


def variable_loss(model: QuadraticLossModel, flow: float) -> float:
    """Flow-dependent part of the physical loss (``true_loss`` minus ``a0``)."""
    a = _check_flow(flow, model.p_max_mw)
    return model.b * a + model.c_per_mw * a * a


@dataclass(frozen=True)
class LinearLossFactor:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"loss factor must lie in [0, 1), got {self.gamma}")

    def __call__(self, flow: float) -> float:
        return self.gamma * abs(flow)


def linearize_secant(model: QuadraticLossModel) -> LinearLossFactor:
    """Secant of the variable loss through the origin and the rated point."""
    if not model.p_max_mw > 0:
        raise ValueError("p_max_mw must be positive")
    return LinearLossFactor(model.b + model.c_per_mw * model.p_max_mw)


@dataclass(frozen=True)
class PwlLossModel:
    """Convex piecewise-linear loss through the origin, symmetric in flow direction."""

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]

    def __post_init__(self):
        bp, s = self.breakpoints, self.slopes
        if len(bp) != len(s) + 1 or not s:
            raise ValueError("need exactly one slope per segment")
        if bp[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b < a for a, b in zip(s, s[1:])):
            raise ValueError("slopes must be non-decreasing (convex loss)")

    @property
    def p_max_mw(self) -> float:
        return self.breakpoints[-1]

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.breakpoints, self.breakpoints[1:]))

    @property
    def segments(self) -> int:
        return len(self.slopes)

    def __call__(self, flow: float) -> float:
        return eval_pwl(self, flow)


def build_pwl(model: QuadraticLossModel, segments: int = 5) -> PwlLossModel:
    """Equal-width chords of the variable loss between consecutive breakpoints."""
    if segments < 1:
        raise ValueError("segments must be >= 1")
    p = model.p_max_mw
    bp = tuple(k * p / segments for k in range(segments)) + (p,)
    slopes = tuple(model.b + model.c_per_mw * (x0 + x1) for x0, x1 in zip(bp, bp[1:]))
    return PwlLossModel(bp, slopes)


def eval_pwl(model: PwlLossModel, flow: float) -> float:
    a = _check_flow(flow, model.p_max_mw)
    total = 0.0
    for x0, x1, s in zip(model.breakpoints, model.breakpoints[1:], model.slopes):
        if a <= x0:
            break
        total += s * (min(a, x1) - x0)
    return total


def eval_pwl_array(model: PwlLossModel, flows: np.ndarray) -> np.ndarray:
    """Vectorised ``eval_pwl`` for grid checks; no range validation."""
    a = np.abs(np.asarray(flows, dtype=float))
    bp = np.asarray(model.breakpoints)
    occupied = np.clip(a[..., None] - bp[:-1], 0.0, np.diff(bp))
    return occupied @ np.asarray(model.slopes)


def pwl_error_bound(model: QuadraticLossModel, segments: int) -> float:
    """Largest gap between a chord and the loss parabola, ``c*w**2/4``."""
    w = model.p_max_mw / segments
    return model.c_per_mw * w * w / 4.0
