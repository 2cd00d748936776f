"""Run-time measurements: discrete invariants, peak tracking, tail metrics.

All functions are pure and operate on a field snapshot plus its grid.  The
two discrete invariants use the rectangle rule, consistent with the
conservation structure of the periodic scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import odd_power
from .operators import PeriodicGrid
from .theory import CompactonSpec, support_halfwidth


class WindowEmptyError(ValueError):
    """The requested measurement window contains no usable nodes."""


@dataclass
class DiagnosticsRecord:
    """One row of the diagnostics time series."""

    t: float
    i1: float
    i2: float
    peak_x: float
    peak_amp: float
    tail_plateau: float
    extras: dict = field(default_factory=dict)


def invariants(u: np.ndarray, grid: PeriodicGrid, n: float) -> tuple[float, float]:
    """Discrete mass and energy-like invariant.

    I1 = dx * sum(u);  I2 = dx * sum(sign(u)|u|^(n+1)) / (n+1),
    the power taken with the same odd extension the dynamics use.
    """
    u = np.asarray(u, dtype=float)
    i1 = grid.dx * float(np.sum(u))
    i2 = grid.dx * float(np.sum(odd_power(u, n + 1.0))) / (n + 1.0)
    return i1, i2


def locate_peak(u: np.ndarray, grid: PeriodicGrid) -> tuple[float, float]:
    """Grid argmax of the field; ties break toward the smallest index."""
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        raise ValueError("cannot locate the peak of an empty field")
    j = int(np.argmax(u))
    return grid.node_coordinate(j), float(u[j])


def analytic_peak_position(
    spec: CompactonSpec,
    t: float,
    frame_velocity: float,
    grid: PeriodicGrid,
) -> float:
    """Analytic compacton center at time ``t``, reduced into the domain."""
    return float(grid.wrap(spec.x_center + (spec.c - frame_velocity) * t))


def peak_delay(
    u: np.ndarray,
    grid: PeriodicGrid,
    spec: CompactonSpec,
    t: float,
    frame_velocity: float = 0.0,
) -> float:
    """Analytic-minus-numerical peak position, wrapped to (-L/2, L/2].

    Positive when the numerical compacton lags the analytic one.
    """
    x_num, _ = locate_peak(u, grid)
    x_ana = analytic_peak_position(spec, t, frame_velocity, grid)
    half = 0.5 * grid.length
    return float(-np.mod(x_num - x_ana + half, grid.length) + half)


def _window_mask(grid: PeriodicGrid, lo: float, hi: float) -> np.ndarray:
    """Boolean mask of nodes whose wrapped coordinate lies in [lo, hi]."""
    span = hi - lo
    rel = np.mod(grid.nodes - lo, grid.length)
    return rel <= span


def tail_plateau_amplitude(
    u: np.ndarray,
    grid: PeriodicGrid,
    spec: CompactonSpec,
    t: float,
    frame_velocity: float = 0.0,
) -> float:
    """Mean |u| over the plateau stretch between the launch ripple and the compacton.

    The window starts one support width past the initial center (clearing
    the ripple shed at the launch position) and ends one support half-width
    behind the current trailing edge.  Requires the compacton to have
    traveled at least four support widths from its initial position.
    """
    u = np.asarray(u, dtype=float)
    w = support_halfwidth(spec.n)
    width = 2.0 * w
    drift = (spec.c - frame_velocity) * t
    sgn = 1.0 if drift >= 0 else -1.0
    separation = abs(drift) - w  # trailing edge to initial center
    if separation < 4.0 * width:
        raise WindowEmptyError(
            f"compacton has traveled only {abs(drift):.3f}; the plateau window "
            f"needs a trailing-edge separation of at least {4 * width:.3f}"
        )
    a = spec.x_center + sgn * width          # just past the launch ripple
    b = spec.x_center + drift - sgn * 2.0 * w  # one half-width behind trailing edge
    lo, hi = (a, b) if a <= b else (b, a)
    if hi - lo >= grid.length:
        raise WindowEmptyError(
            "plateau window spans the whole periodic domain; the compacton has lapped"
        )
    mask = _window_mask(grid, lo, hi)
    if not mask.any():
        raise WindowEmptyError("plateau window contains no grid nodes")
    return float(np.mean(np.abs(u[mask])))


def ripple_amplitude(u: np.ndarray, grid: PeriodicGrid, window: tuple[float, float]) -> float:
    """Max |u| over the coordinate interval ``window`` (wrapped periodically)."""
    lo, hi = window
    if hi < lo:
        raise ValueError(f"window must satisfy lo <= hi, got {window}")
    if hi - lo > grid.length:
        raise ValueError("window is longer than the periodic domain")
    u = np.asarray(u, dtype=float)
    mask = _window_mask(grid, lo, hi)
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(u[mask])))
