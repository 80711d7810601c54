"""
Window functions and the scalar functionals every certificate consumes.

Conventions:
    f̂(s) = ∫ f(t) e^{+2πist} dt
    rect is the indicator of the closed interval [-1/2, 1/2]
    bspline(p) is the p-fold self-convolution of rect, supported on [-p/2, p/2]
    sinc(M) is h(x) = M·sinc(Mx), whose transform is the indicator of (-M/2, M/2)
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import BSpline
from scipy.signal import fftconvolve

from .exceptions import ConvergenceError, PreconditionError
from .grids import (
    DEFAULT_QUADRATURE_STEP,
    GridSpec,
    SampledFunction,
    converged_integral,
)


logger = logging.getLogger('frames')

UNIFORMITY_RTOL = 1e-12
FEATURE_CELLS = 64


class WindowKind(str, Enum):
    RECT = 'rect'
    BSPLINE = 'bspline'
    SINC = 'sinc'
    SAMPLED = 'sampled'
    DERIVATIVE = 'derivative'


@dataclass(frozen=True, eq=False)
class Window:
    """
    A window function with its support metadata.

    support is a closed interval (lo, hi) or None for unbounded support.
    band_limit, when set, declares ĥ supported in (-band_limit, band_limit)
    with 2·band_limit a positive integer.
    """
    kind: WindowKind
    support: Optional[Tuple[float, float]]
    order: Optional[int] = None
    band_limit: Optional[float] = None
    x0: Optional[float] = None
    dx: Optional[float] = None
    values: Optional[np.ndarray] = None
    base: Optional['Window'] = None

    def __post_init__(self):
        if self.kind is WindowKind.RECT and self.support != (-0.5, 0.5):
            raise PreconditionError('rect is supported on [-1/2, 1/2]')
        if self.kind is WindowKind.BSPLINE:
            if self.order is None or self.order < 1:
                raise PreconditionError('bspline order p must be >= 1')
            if self.support != (-self.order / 2, self.order / 2):
                raise PreconditionError('bspline(p) is supported on [-p/2, p/2]')
        if self.kind is WindowKind.SAMPLED:
            if self.values is None or self.dx is None or self.x0 is None:
                raise PreconditionError('sampled windows need x0, dx and values')
            if self.dx <= 0:
                raise PreconditionError('sample step must be positive')
            if not np.all(np.isfinite(self.values)):
                raise PreconditionError('sampled window has non-finite values')
        if self.support is not None and self.support[1] < self.support[0]:
            raise PreconditionError('support must satisfy lo <= hi')
        if self.band_limit is not None:
            width = 2 * self.band_limit
            if width <= 0 or abs(width - round(width)) > 1e-12:
                raise PreconditionError('band_limit must be M/2 for a positive integer M')

    # -- constructors -------------------------------------------------------

    @classmethod
    def rect(cls) -> 'Window':
        return cls(WindowKind.RECT, (-0.5, 0.5))

    @classmethod
    def bspline(cls, p: int) -> 'Window':
        p = int(p)
        return cls(WindowKind.BSPLINE, (-p / 2, p / 2), order=p)

    @classmethod
    def sinc(cls, M: int) -> 'Window':
        M = int(M)
        if M < 1:
            raise PreconditionError('sinc bandwidth M must be a positive integer')
        return cls(WindowKind.SINC, None, order=M, band_limit=M / 2)

    @classmethod
    def sampled(cls, x, values, support: Optional[Tuple[float, float]] = None,
                band_limit: Optional[float] = None) -> 'Window':
        """Window from samples on strictly increasing, uniformly spaced x."""
        x = np.asarray(x, dtype=float)
        vals = np.asarray(values)
        if x.ndim != 1 or x.shape != vals.shape:
            raise PreconditionError('x and values must be one-dimensional and of equal length')
        if x.size < 2:
            raise PreconditionError('a sampled window needs at least two samples')
        steps = np.diff(x)
        if np.any(steps <= 0):
            raise PreconditionError('sample positions must be strictly increasing')
        step = float(steps.mean())
        slack = UNIFORMITY_RTOL * step + 4 * np.finfo(float).eps * np.max(np.abs(x))
        if np.max(np.abs(steps - step)) > slack:
            raise PreconditionError('sample positions must be uniformly spaced')
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if support is None:
            support = (float(x[0]), float(x[-1]))
        return cls(WindowKind.SAMPLED, (float(support[0]), float(support[1])),
                   band_limit=band_limit, x0=float(x[0]), dx=step, values=vals)

    @classmethod
    def derivative(cls, w: 'Window') -> 'Window':
        """Pointwise derivative h' of a window that is Lipschitz on its support."""
        if w.kind is WindowKind.RECT or (w.kind is WindowKind.BSPLINE and w.order == 1):
            raise PreconditionError('distributional derivative: the window is discontinuous')
        if w.kind is WindowKind.DERIVATIVE:
            raise PreconditionError('higher derivatives are not supported')
        if w.kind is WindowKind.SAMPLED:
            grad = np.gradient(w.values, w.dx)
            return cls(WindowKind.SAMPLED, w.support, band_limit=w.band_limit,
                       x0=w.x0, dx=w.dx, values=grad)
        return cls(WindowKind.DERIVATIVE, w.support, band_limit=w.band_limit, base=w)

    # -- metadata -----------------------------------------------------------

    @property
    def is_compact(self) -> bool:
        return self.support is not None

    @property
    def support_length(self) -> float:
        if self.support is None:
            return math.inf
        return self.support[1] - self.support[0]

    @property
    def bandwidth(self) -> Optional[int]:
        """The integer M with ĥ supported in (-M/2, M/2), when declared."""
        if self.band_limit is None:
            return None
        return int(round(2 * self.band_limit))

    @property
    def sample_points(self) -> np.ndarray:
        return self.x0 + np.arange(self.values.size) * self.dx

    @property
    def label(self) -> str:
        if self.kind is WindowKind.BSPLINE:
            return f'bspline({self.order})'
        if self.kind is WindowKind.SINC:
            return f'sinc({self.order})'
        if self.kind is WindowKind.DERIVATIVE:
            return f'derivative({self.base.label})'
        return self.kind.value

    def __call__(self, x):
        return eval_window(self, x)

    def to_dict(self) -> dict:
        data = {
            "kind": self.label,
            "support": list(self.support) if self.support is not None else "unbounded",
            "band_limit": self.band_limit,
        }
        if self.kind is WindowKind.SAMPLED:
            data["dx"] = self.dx
            data["n_samples"] = int(self.values.size)
            data["values_sha256"] = hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()
        return data


@dataclass(frozen=True)
class WindowFunctionals:
    l1: float
    l2: float
    sup_ft: float
    c: float

    def __post_init__(self):
        for name in ('l1', 'l2', 'sup_ft', 'c'):
            if getattr(self, name) < 0:
                raise PreconditionError(f'window functional {name} must be nonnegative')

    def to_dict(self) -> dict:
        return {"l1": self.l1, "l2": self.l2, "sup_ft": self.sup_ft, "c": self.c}


# -- pointwise evaluation -----------------------------------------------------

@lru_cache(maxsize=64)
def _bspline_basis(p: int, derivative: int = 0) -> BSpline:
    knots = np.arange(p + 1, dtype=float) - p / 2
    spline = BSpline.basis_element(knots, extrapolate=False)
    return spline.derivative(derivative) if derivative else spline


def _rect_values(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) <= 0.5, 1.0, 0.0)


def _bspline_values(p: int, x: np.ndarray, derivative: int = 0) -> np.ndarray:
    if p == 1 and derivative == 0:
        return _rect_values(x)
    return np.nan_to_num(_bspline_basis(p, derivative)(x), nan=0.0)


def _dsinc(u: np.ndarray) -> np.ndarray:
    """d/du sinc(u) with sinc(u) = sin(πu)/(πu)."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    out = (np.cos(np.pi * safe) - np.sinc(safe)) / safe
    return np.where(small, -(np.pi ** 2) * u / 3.0, out)


def eval_window(w: Window, x):
    """Exact closed form for analytic kinds, linear interpolation for sampled ones."""
    arr = np.asarray(x, dtype=float)
    if w.kind is WindowKind.RECT:
        out = _rect_values(arr)
    elif w.kind is WindowKind.BSPLINE:
        out = _bspline_values(w.order, arr)
    elif w.kind is WindowKind.SINC:
        out = w.order * np.sinc(w.order * arr)
    elif w.kind is WindowKind.SAMPLED:
        xs = w.sample_points
        if np.iscomplexobj(w.values):
            out = (np.interp(arr, xs, w.values.real, left=0.0, right=0.0)
                   + 1j * np.interp(arr, xs, w.values.imag, left=0.0, right=0.0))
        else:
            out = np.interp(arr, xs, w.values, left=0.0, right=0.0)
        lo, hi = w.support
        out = np.where((arr >= lo) & (arr <= hi), out, 0.0)
    else:
        base = w.base
        if base.kind is WindowKind.BSPLINE:
            q = base.order - 1
            out = _bspline_values(q, arr + 0.5) - _bspline_values(q, arr - 0.5)
        else:
            M = base.order
            out = M * M * _dsinc(M * arr)
    if np.ndim(out) == 0:
        return out[()]
    return out


def fourier_eval(w: Window, s):
    """ĥ(s) in closed form for analytic kinds, by direct quadrature for sampled ones."""
    s = np.asarray(s, dtype=float)
    if w.kind is WindowKind.RECT:
        out = np.sinc(s)
    elif w.kind is WindowKind.BSPLINE:
        out = np.sinc(s) ** w.order
    elif w.kind is WindowKind.SINC:
        out = np.where(np.abs(s) < w.order / 2, 1.0, 0.0)
    elif w.kind is WindowKind.DERIVATIVE:
        out = -2j * np.pi * s * fourier_eval(w.base, s)
    else:
        out = _direct_dft(w.sample_points, w.values, w.dx, np.atleast_1d(s)).reshape(s.shape)
    if np.ndim(out) == 0:
        return out[()]
    return out


def _direct_dft(x: np.ndarray, values: np.ndarray, dx: float, s: np.ndarray) -> np.ndarray:
    """Σ_j values_j e^{2πi s x_j} dx, chunked over s."""
    out = np.empty(s.size, dtype=complex)
    flat = s.ravel()
    chunk = max(1, (1 << 22) // max(1, x.size))
    for start in range(0, flat.size, chunk):
        part = flat[start:start + chunk]
        out[start:start + chunk] = np.exp(2j * np.pi * np.outer(part, x)) @ values * dx
    return out


# -- functionals --------------------------------------------------------------

def autocorrelation(w: Window, t, dx: float = DEFAULT_QUADRATURE_STEP):
    """R(t) = ∫ h(x) conj(h(x - t)) dx."""
    t = np.asarray(t, dtype=float)
    if w.kind in (WindowKind.RECT, WindowKind.BSPLINE):
        p = 1 if w.kind is WindowKind.RECT else w.order
        out = _bspline_values(2 * p, t)
    elif w.kind is WindowKind.SINC:
        out = w.order * np.sinc(w.order * t)
    elif w.kind is WindowKind.DERIVATIVE and w.base.kind is WindowKind.BSPLINE:
        out = -_bspline_values(2 * w.base.order, t, derivative=2)
    elif w.is_compact:
        lo, hi = w.support
        flat = np.atleast_1d(t).ravel()
        vals = np.empty(flat.size, dtype=complex)
        for i, shift in enumerate(flat):
            a, b = max(lo, lo + shift), min(hi, hi + shift)
            if b <= a:
                vals[i] = 0.0
                continue
            vals[i] = converged_integral(
                lambda x, s=shift: eval_window(w, x) * np.conj(eval_window(w, x - s)),
                a, b, dx=dx, label='autocorrelation',
            )
        out = vals.reshape(t.shape)
        if w.kind is WindowKind.SAMPLED and not np.iscomplexobj(w.values):
            out = out.real
    else:
        raise PreconditionError('autocorrelation needs a closed form or compact support')
    if np.ndim(out) == 0:
        return out[()]
    return out


def shift_diff_norm(w: Window, t):
    """m(t) = ‖h - h(· - t)‖₂, via m² = 2(R(0) - Re R(t))."""
    t = np.asarray(t, dtype=float)
    r0 = np.real(autocorrelation(w, 0.0))
    rt = np.real(autocorrelation(w, t))
    out = np.sqrt(np.maximum(2.0 * (r0 - rt), 0.0))
    if np.ndim(out) == 0:
        return float(out)
    return out


def iterate_convolution(w: Window, p: int, dx: float = 2.0 ** -10) -> Window:
    """Sampled p-fold self-convolution h * ... * h, supported on [p·lo, p·hi]."""
    if not w.is_compact:
        raise PreconditionError('convolution requires compact support')
    p = int(p)
    if p < 1:
        raise PreconditionError('convolution power p must be >= 1')
    if p == 1:
        return w
    lo, hi = w.support
    n = max(2, int(math.ceil((hi - lo) / dx - 1e-9)))
    step = (hi - lo) / n
    samples = np.asarray(eval_window(w, lo + (np.arange(n) + 0.5) * step))
    out = samples
    for _ in range(p - 1):
        out = fftconvolve(out, samples) * step
    # The i-th entry is centred at the sum of p sample midpoints.
    first = p * lo + 0.5 * p * step
    x = first + np.arange(out.size) * step
    return Window.sampled(x, out, support=(p * lo, p * hi))


def _require_resolved(w: Window, grid: GridSpec) -> None:
    if not w.is_compact:
        raise PreconditionError('window is not integrable: unbounded support')
    lo, hi = w.support
    if not grid.contains(lo, hi):
        raise PreconditionError('window support exceeds the grid')
    c = w.support_length
    if c > 0 and grid.dx > c / FEATURE_CELLS * (1 + 1e-12):
        raise PreconditionError('grid step too coarse to resolve the window support (Nyquist)')
    if w.kind is WindowKind.SAMPLED and grid.dx > w.dx * (1 + 1e-9):
        raise PreconditionError('grid step too coarse to resolve the sampled window (Nyquist)')


def fourier_transform(w: Window, grid: GridSpec, frequencies=None) -> SampledFunction:
    """
    Sampled ĥ with the e^{+2πist} convention.

    Without explicit frequencies the transform is taken by FFT on the grid's
    natural frequencies k/(N·Δx); otherwise by direct summation.
    """
    _require_resolved(w, grid)
    x = grid.points
    h = np.asarray(eval_window(w, x), dtype=complex)
    if frequencies is None:
        n = grid.n_points
        freqs = np.fft.fftfreq(n, d=grid.dx)
        values = grid.dx * np.exp(2j * np.pi * freqs * x[0]) * n * np.fft.ifft(h)
        return SampledFunction(np.fft.fftshift(freqs), np.fft.fftshift(values))
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    nyquist = 0.5 / grid.dx
    if np.any(np.abs(freqs) > nyquist):
        raise PreconditionError(f'frequencies beyond the grid Nyquist limit {nyquist}')
    return SampledFunction(freqs, _direct_dft(x, h, grid.dx, freqs))


def window_functionals(w: Window, grid: GridSpec) -> WindowFunctionals:
    """‖h‖₁, ‖h‖₂, ‖ĥ‖∞ and the support length c."""
    if w.kind is WindowKind.RECT:
        return WindowFunctionals(1.0, 1.0, 1.0, 1.0)
    if w.kind is WindowKind.BSPLINE:
        r0 = float(_bspline_values(2 * w.order, np.array(0.0)))
        return WindowFunctionals(1.0, math.sqrt(r0), 1.0, float(w.order))
    if w.kind is WindowKind.SINC:
        M = w.order
        return WindowFunctionals(math.inf, math.sqrt(M), 1.0, math.inf)
    if w.kind is WindowKind.DERIVATIVE and w.base.kind is WindowKind.SINC:
        M = w.base.order
        l2 = 2 * math.pi * math.sqrt(M ** 3 / 12.0)
        return WindowFunctionals(math.inf, l2, math.pi * M, math.inf)
    _require_resolved(w, grid)
    h = np.asarray(eval_window(w, grid.points))
    l1 = float(np.sum(np.abs(h)) * grid.dx)
    l2 = float(np.sqrt(np.sum(np.abs(h) ** 2) * grid.dx))
    sup_ft = float(np.max(np.abs(fourier_transform(w, grid).values)))
    return WindowFunctionals(l1, l2, sup_ft, w.support_length)


def wiener_amalgam_norm(g: Window, dx: float = DEFAULT_QUADRATURE_STEP, tail_rtol: float = 1e-6,
                        max_cells: int = 4096) -> float:
    """
    Σ_m sup over [m - 1/2, m + 1/2) of |g|.

    Each cell supremum is the maximum over the samples m - 1/2 + j·dx,
    j = 0 .. 1/dx - 1, so the left endpoint belongs to the cell. For unbounded
    support the sum runs over |m| <= max_cells and must show decay: the outer
    quarter of the cells may carry at most tail_rtol of the total.
    """
    per_cell = int(round(1.0 / dx))
    if per_cell < 1 or abs(per_cell * dx - 1.0) > 1e-12:
        raise PreconditionError('amalgam sampling step must divide the unit cell')
    offsets = np.arange(per_cell) / per_cell - 0.5

    def cell_maxima(cells: np.ndarray) -> np.ndarray:
        out = np.empty(cells.size)
        chunk = max(1, (1 << 21) // per_cell)
        for start in range(0, cells.size, chunk):
            part = cells[start:start + chunk]
            x = part[:, None] + offsets[None, :]
            out[start:start + chunk] = np.max(np.abs(eval_window(g, x)), axis=1)
        return out

    if g.is_compact:
        lo, hi = g.support
        cells = np.arange(math.floor(lo + 0.5), math.floor(hi + 0.5) + 1, dtype=float)
        return float(np.sum(cell_maxima(cells)))

    cells = np.arange(-max_cells, max_cells + 1, dtype=float)
    maxima = cell_maxima(cells)
    total = float(np.sum(maxima))
    outer = float(np.sum(maxima[np.abs(cells) > 0.75 * max_cells]))
    if total > 0 and outer > tail_rtol * total:
        logger.warning(json.dumps({"event": "amalgam_tail_divergent", "window": g.label,
                                   "outer_fraction": outer / total}))
        raise ConvergenceError('amalgam norm: no decay detected within truncation budget',
                               residual=outer / total, iterations=max_cells)
    return total


# -- file interface -------------------------------------------------------------

def load_sampled_window(path, band_limit: Optional[float] = None) -> Window:
    """Read a CSV with header `x,value` into a sampled window."""
    path = Path(path)
    if not path.exists():
        raise PreconditionError(f"sampled window file '{path}' not found")
    with path.open(newline='') as handle:
        reader = csv.reader(handle)
        header = [cell.strip() for cell in next(reader, [])]
        if header != ['x', 'value']:
            raise PreconditionError(f"sampled window file must start with header 'x,value', got {header}")
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    try:
        data = np.array([[float(row[0]), float(row[1])] for row in rows])
    except (ValueError, IndexError) as exc:
        raise PreconditionError(f'malformed sampled window row: {exc}') from exc
    if data.shape[0] < 2:
        raise PreconditionError('sampled window file needs at least two rows')
    window = Window.sampled(data[:, 0], data[:, 1], band_limit=band_limit)
    logger.info(json.dumps({"event": "sampled_window_loaded", "path": str(path),
                            "n_samples": int(data.shape[0]), "dx": window.dx}))
    return window
