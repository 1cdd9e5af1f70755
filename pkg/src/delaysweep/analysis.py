"""Exact L2 / sup / W^{1,2} distances between piecewise signals.

All official report numbers come from closed-form integration over the
merged breakpoint partition; the integrands are piecewise polynomials of
degree at most two, so the formulas here are exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, TimeOutOfRange

_DOMAIN_TOL = 1e-9


def _as_2d(values):
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    return v


@dataclass(frozen=True)
class StepSignal:
    """Piecewise-constant, right-continuous signal on [times[0], times[-1]].

    ``values[i]`` is the value on [times[i], times[i+1]); the value at the
    right endpoint of the domain is the last interval's value.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", _as_2d(self.values))
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.values.shape[0] != len(self.times) - 1:
            raise ValueError("values must have one row per interval")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self):
        return (self.times[0], self.times[-1])

    def _interval_index(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 2)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo - _DOMAIN_TOL) or np.any(t > hi + _DOMAIN_TOL):
            raise TimeOutOfRange(f"query outside [{lo}, {hi}]")
        out = self.values[np.atleast_1d(self._interval_index(t))]
        return out[0] if t.ndim == 0 else out

    def segment_table(self, grid):
        """Per-segment (value-at-left, slope) arrays for a refining grid."""
        idx = self._interval_index(grid[:-1])
        v0 = self.values[idx]
        return v0, np.zeros_like(v0)


@dataclass(frozen=True)
class AffineSignal:
    """Continuous piecewise-affine signal given by breakpoint values."""

    times: np.ndarray
    values: np.ndarray
    slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", _as_2d(self.values))
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("need at least two breakpoints")
        dt = np.diff(self.times)
        if np.any(dt <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.values.shape[0] != len(self.times):
            raise ValueError("values must have one row per breakpoint")
        slopes = np.diff(self.values, axis=0) / dt[:, None]
        object.__setattr__(self, "slopes", slopes)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self):
        return (self.times[0], self.times[-1])

    def _interval_index(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 2)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo - _DOMAIN_TOL) or np.any(t > hi + _DOMAIN_TOL):
            raise TimeOutOfRange(f"query outside [{lo}, {hi}]")
        idx = self._interval_index(t)
        out = self.values[idx] + (np.atleast_1d(t) - self.times[idx])[:, None] * self.slopes[idx]
        return out[0] if t.ndim == 0 else out

    def derivative(self) -> StepSignal:
        return StepSignal(self.times, self.slopes)

    def segment_table(self, grid):
        idx = self._interval_index(grid[:-1])
        v0 = self.values[idx] + (grid[:-1] - self.times[idx])[:, None] * self.slopes[idx]
        return v0, self.slopes[idx]


Signal = StepSignal | AffineSignal


def merged_grid(a: Signal, b: Signal) -> np.ndarray:
    (a0, a1), (b0, b1) = a.domain, b.domain
    if abs(a0 - b0) > _DOMAIN_TOL or abs(a1 - b1) > _DOMAIN_TOL:
        raise DomainMismatch(f"domains [{a0},{a1}] and [{b0},{b1}] differ")
    grid = np.union1d(a.times, b.times)
    # collapse breakpoints that differ only by domain-boundary rounding
    keep = np.concatenate(([True], np.diff(grid) > 1e-15))
    return grid[keep]


def dist_L2(a: Signal, b: Signal) -> float:
    """Exact L2 distance over the merged breakpoint partition."""
    if a.dim != b.dim:
        raise DomainMismatch("signal dimensions differ")
    grid = merged_grid(a, b)
    va, sa = a.segment_table(grid)
    vb, sb = b.segment_table(grid)
    d0 = va - vb
    dd = sa - sb
    seg = np.diff(grid)
    # integral of ||d0 + s*dd||^2 over s in [0, L]
    total = np.sum(
        np.sum(d0 * d0, axis=1) * seg
        + np.sum(d0 * dd, axis=1) * seg**2
        + np.sum(dd * dd, axis=1) * seg**3 / 3.0
    )
    return math.sqrt(max(total, 0.0))


def sup_dist(a: Signal, b: Signal) -> float:
    """Sup-norm distance; the piecewise-affine difference peaks at breakpoints."""
    if a.dim != b.dim:
        raise DomainMismatch("signal dimensions differ")
    grid = merged_grid(a, b)
    va, sa = a.segment_table(grid)
    vb, sb = b.segment_table(grid)
    d0 = va - vb
    d1 = d0 + (sa - sb) * np.diff(grid)[:, None]
    return float(max(np.linalg.norm(d0, axis=1).max(), np.linalg.norm(d1, axis=1).max()))


def dist_W12(a, b) -> float:
    """W^{1,2} distance between two trajectory-like objects.

    Operands must expose ``value_signal()`` (piecewise-affine) and
    ``derivative_signal()`` (piecewise-constant).
    """
    dv = dist_L2(a.value_signal(), b.value_signal())
    dd = dist_L2(a.derivative_signal(), b.derivative_signal())
    return math.sqrt(dv * dv + dd * dd)


def gronwall_envelope(beta: float, base: float, horizon) -> float:
    """Scalar Gronwall envelope base * exp(4*beta*(T - t0))."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    t0, T = horizon
    return base * math.exp(4.0 * beta * (T - t0))
