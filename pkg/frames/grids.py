"""
Uniform sample grids shared by quadrature, FFTs and the frame-operator oracle.

Samples sit at cell midpoints, x_j = x_min + (j + 1/2) dx, so every Δx-weighted
sum is a midpoint-rule integral over [x_min, x_max).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConvergenceError, PreconditionError


logger = logging.getLogger('frames')

DEFAULT_QUADRATURE_STEP = 2.0 ** -12
QUADRATURE_RTOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise PreconditionError('grid bounds must be finite')
        if self.x_max <= self.x_min:
            raise PreconditionError('grid requires x_min < x_max')
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise PreconditionError(f'n_points must be a power of two >= 2, got {self.n_points}')

    @classmethod
    def centered(cls, half_width: float, n_points: int) -> 'GridSpec':
        return cls(-float(half_width), float(half_width), int(n_points))

    @classmethod
    def with_step(cls, x_min: float, x_max: float, dx: float) -> 'GridSpec':
        """Smallest power-of-two grid over [x_min, x_max) whose step is at most dx."""
        n = 2
        while (x_max - x_min) / n > dx * (1 + 1e-12):
            n *= 2
        return cls(x_min, x_max, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def points(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_points) + 0.5) * self.dx

    @property
    def first_point(self) -> float:
        return self.x_min + 0.5 * self.dx

    def refined(self) -> 'GridSpec':
        return GridSpec(self.x_min, self.x_max, 2 * self.n_points)

    def contains(self, lo: float, hi: float, margin: float = 0.0) -> bool:
        return lo >= self.x_min + margin - 1e-12 and hi <= self.x_max - margin + 1e-12

    def check_samples(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values)
        if arr.shape[-1] != self.n_points:
            raise PreconditionError(
                f'grid mismatch: expected {self.n_points} samples, got {arr.shape[-1]}'
            )
        return arr

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Δx-weighted inner product <f, g> = Σ f conj(g) Δx."""
        return complex(np.vdot(g, f) * self.dx)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dx))

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points, "dx": self.dx}


def midpoint_integral(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                      dx: float = DEFAULT_QUADRATURE_STEP) -> complex:
    """Midpoint rule on [lo, hi] with cells no wider than dx."""
    n = max(1, int(math.ceil((hi - lo) / dx - 1e-9)))
    step = (hi - lo) / n
    total = 0.0 + 0.0j
    # Chunked to bound memory on long intervals.
    chunk = 1 << 20
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        x = lo + (idx + 0.5) * step
        total += np.sum(func(x))
    return complex(total * step)


def converged_integral(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       dx: float = DEFAULT_QUADRATURE_STEP, rtol: float = QUADRATURE_RTOL,
                       max_levels: int = 4, label: str = 'integral') -> complex:
    """
    Midpoint integral checked against the half-step rule.

    The step is halved until two successive levels agree to rtol (relative, or
    absolute when the value is zero); the finer value is returned.
    """
    previous = midpoint_integral(func, lo, hi, dx)
    step = dx
    for level in range(max_levels):
        step /= 2
        current = midpoint_integral(func, lo, hi, step)
        change = abs(current - previous)
        scale = max(abs(current), 1e-300)
        if change <= rtol * scale or change <= 1e-14:
            return current
        previous = current
    logger.warning(json.dumps({"event": "quadrature_not_converged", "label": label,
                               "step": step, "change": float(change)}))
    raise ConvergenceError(f'{label}: quadrature did not converge under refinement',
                           residual=float(change / scale), iterations=max_levels)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a function on an explicit, increasing set of points."""
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.points) != np.shape(self.values):
            raise PreconditionError('points and values must have the same shape')

    def at(self, x: float) -> complex:
        """Value at the sample nearest to x."""
        idx = int(np.argmin(np.abs(self.points - x)))
        return self.values[idx]
