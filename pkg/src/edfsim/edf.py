"""Empirical distribution function of upper-tail p-values on a fixed grid.

For a Gaussian vector Y the p-values are upper_tail(Y_i), and

    F_m(t) = m^-1 #{i : upper_tail(Y_i) <= t}        (ties included, <=).

Evaluation sorts the p-values once and binary-searches the grid, O(m log m)
plus O(|grid| log m).  Paths are the centered, rescaled versions
scale * (F_m(t) - t), pinned to 0 at t in {0, 1} (exact there up to p-value
underflow, which the pinning makes irrelevant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .hermite import c1_values
from .normal import upper_tail

DEFAULT_GRID_SIZE = 513


@dataclass(frozen=True)
class ProcessGrid:
    """Strictly increasing evaluation points in [0, 1], endpoints included."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise ParameterError("grid must be a 1-D array with at least 3 points")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("grid points must be finite")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ParameterError("grid must start at 0 and end at 1")
        if np.any(np.diff(pts) <= 0.0):
            raise ParameterError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def default(cls, size: int = DEFAULT_GRID_SIZE) -> "ProcessGrid":
        if size < 3:
            raise ParameterError("grid size must be at least 3")
        return cls(points=np.linspace(0.0, 1.0, size))


def edf(y, grid: ProcessGrid) -> np.ndarray:
    """F_m(t) on the grid; y of shape (m,) or (reps, m) -> matching leading shape."""
    y = np.asarray(y, dtype=float)
    p = np.sort(np.asarray(upper_tail(y)), axis=-1)
    m = y.shape[-1]
    if y.ndim == 1:
        return np.searchsorted(p, grid.points, side="right") / m
    if y.ndim == 2:
        out = np.empty((y.shape[0], len(grid)))
        for i in range(y.shape[0]):
            out[i] = np.searchsorted(p[i], grid.points, side="right")
        return out / m
    raise ParameterError("y must be 1-D or 2-D")


def rescaled_path(y, grid: ProcessGrid, scale: float) -> np.ndarray:
    """scale * (F_m(t) - t) on the grid, pinned to 0 at both endpoints."""
    values = float(scale) * (edf(y, grid) - grid.points)
    values[..., 0] = 0.0
    values[..., -1] = 0.0
    return values


def modified_path(y, grid: ProcessGrid, scale: float) -> np.ndarray:
    """Rescaled path with the first Hermite direction removed.

    scale * (F_m(t) - t) - c_1(t) * scale * mean(Y): subtracting the
    c_1-weighted sample mean cancels the dominant shared-factor fluctuation,
    restoring the sqrt(m)-rate bridge-like behavior.
    """
    y = np.asarray(y, dtype=float)
    base = rescaled_path(y, grid, scale)
    c1 = np.asarray(c1_values(grid.points))
    ybar = np.mean(y, axis=-1)
    if y.ndim == 1:
        return base - c1 * (float(scale) * ybar)
    return base - c1[None, :] * (float(scale) * ybar)[:, None]


def detrended_indicator(x, t: float) -> np.ndarray | float:
    """h_t(x) = 1{upper_tail(x) <= t} - t - c_1(t) x.

    The summand of the modified e.d.f.: mean over a sample equals
    (modified F_m)(t) - t by construction.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ParameterError("t must lie in [0, 1]")
    x_arr = np.asarray(x, dtype=float)
    ind = (np.asarray(upper_tail(x_arr)) <= t).astype(float)
    out = ind - t - float(c1_values(t)) * x_arr
    return float(out) if x_arr.ndim == 0 else out
