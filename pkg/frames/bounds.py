"""
Frame bounds of unperturbed Gabor systems G(h; a, b).

Painless bounds come from the periodized energy Σ_k |h(x - ak)|², Fourier-side
bounds from the periodized spectrum Σ_k |ĥ(x - bk)|². Essential extrema are
taken over one period by grid scans that are refined until two levels agree.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from .exceptions import ConvergenceError, PreconditionError
from .gabor import DENSITY_SLACK
from .windows import Window, WindowKind, eval_window, fourier_eval


logger = logging.getLogger('frames')

SCAN_POINTS = 2048
SCAN_RTOL = 1e-6
SCAN_LEVELS = 4
TAIL_RTOL = 1e-4
FOURIER_TRUNCATION = 2 ** 14
NH_TRUNCATION = 10 ** 4
NH_EXPONENT = 4.0 / 3.0
REGIME_SLACK = 1e-12


class BoundsProvenance(str, Enum):
    PAINLESS = 'painless'
    FOURIER_SIDE = 'fourier-side'
    RECT_SPECIAL = 'rect-special'
    RESCALED = 'rescaled'
    BSPLINE_RECURSION = 'bspline-recursion'
    EMPIRICAL = 'empirical'
    CERTIFIED_PERTURBED = 'certified-perturbed'
    EXPLICIT = 'explicit'


@dataclass(frozen=True)
class FrameBounds:
    A: float
    B: float
    provenance: BoundsProvenance
    optimal: bool = False

    def __post_init__(self):
        if not (self.A > 0 and math.isfinite(self.A)):
            raise PreconditionError(f'lower frame bound must be positive, got {self.A}')
        if not (self.B >= self.A and math.isfinite(self.B)):
            raise PreconditionError(f'frame bounds must satisfy A <= B, got A={self.A}, B={self.B}')

    @property
    def ratio(self) -> float:
        return self.B / self.A

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "provenance": self.provenance.value,
                "optimal": self.optimal}


@dataclass(frozen=True)
class NhValue:
    """
    N(h) for frequency step b.

    convention 'lemma' is sup_x Σ_k |ĥ(x + kb)|^{4/3}; 'proof' is the same
    supremum raised to the power 3/4.
    """
    value: float
    b: float
    convention: str = 'proof'
    trunc: Optional[int] = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.convention not in ('proof', 'lemma'):
            raise PreconditionError(f"unknown N(h) convention '{self.convention}'")
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise PreconditionError('N(h) must be finite and nonnegative')

    def to_dict(self) -> dict:
        return {"value": self.value, "b": self.b, "convention": self.convention,
                "trunc": self.trunc, **self.details}


def _log_bounds(bounds: FrameBounds, window: Optional[Window], **extra) -> FrameBounds:
    logger.info(json.dumps({"event": "bounds_computed", **bounds.to_dict(),
                            "window": window.label if window is not None else None, **extra}))
    return bounds


# -- essential extrema ----------------------------------------------------------

def _scan(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int,
          extra: np.ndarray) -> Tuple[float, float, float, float]:
    step = (hi - lo) / n
    eps = 1e-9 * (hi - lo)
    base = lo + np.arange(n) * step
    x = np.concatenate([base - eps, base + eps, extra])
    vals = np.asarray(func(x), dtype=float)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    return float(vals[i_min]), float(vals[i_max]), float(x[i_min]), float(x[i_max])


def essential_extremes(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       n: int = SCAN_POINTS, rtol: float = SCAN_RTOL,
                       max_levels: int = SCAN_LEVELS, extra: Iterable[float] = (),
                       polish: bool = False, label: str = 'scan') -> Tuple[float, float]:
    """
    Essential inf and sup of a periodic function over [lo, hi).

    Samples sit at lo + j·(hi - lo)/n ± ε (ε = 1e-9·(hi - lo)) plus any extra
    points, so both one-sided limits at a lattice breakpoint are seen. The
    sample count doubles until inf and sup agree with the previous level to
    rtol. With polish, the extremal samples are refined by a bounded scalar
    search over the neighbouring cells.
    """
    extra = np.asarray(list(extra), dtype=float)

    def scalar(x: float) -> float:
        return float(np.asarray(func(np.array([x])))[0])

    def level(points: int) -> Tuple[float, float]:
        inf, sup, x_inf, x_sup = _scan(func, lo, hi, points, extra)
        if polish:
            step = (hi - lo) / points
            low = minimize_scalar(scalar, bounds=(x_inf - step, x_inf + step),
                                  method='bounded', options={'xatol': 1e-12})
            high = minimize_scalar(lambda x: -scalar(x), bounds=(x_sup - step, x_sup + step),
                                   method='bounded', options={'xatol': 1e-12})
            inf = min(inf, float(low.fun))
            sup = max(sup, float(-high.fun))
        return inf, sup

    prev = level(n)
    current = prev
    for _ in range(max_levels):
        n *= 2
        current = level(n)
        scale = max(abs(current[1]), 1e-300)
        if abs(current[0] - prev[0]) <= rtol * scale and abs(current[1] - prev[1]) <= rtol * scale:
            return current
        prev = current
    change = max(abs(current[0] - prev[0]), abs(current[1] - prev[1]))
    logger.warning(json.dumps({"event": "scan_not_converged", "label": label,
                               "points": n, "change": change}))
    raise ConvergenceError(f'{label}: essential extrema did not converge under refinement',
                           residual=change, iterations=max_levels)


# -- painless regime --------------------------------------------------------------

def _check_painless_regime(w: Window, a: float, b: float) -> float:
    if not w.is_compact:
        raise PreconditionError('painless regime violated: window support is unbounded')
    c = w.support_length
    if a > c * (1 + REGIME_SLACK) or c > (1 / b) * (1 + REGIME_SLACK):
        raise PreconditionError(
            f'painless regime violated: need a <= c <= 1/b, got a={a:g}, c={c:g}, 1/b={1 / b:g}'
        )
    return c


def _shifted_energy(w: Window, shifts: np.ndarray):
    """x -> Σ_k |h(x - shift_k)|²."""

    def energy(x: np.ndarray) -> np.ndarray:
        return np.sum(np.abs(eval_window(w, x[:, None] - shifts[None, :])) ** 2, axis=1)

    return energy


def painless_bounds(w: Window, a: float, b: float) -> FrameBounds:
    """
    Optimal bounds A = (1/b)·ess-inf Σ_k |h(x - ak)|², B = (1/b)·ess-sup,
    valid when a <= c <= 1/b for the support length c.
    """
    if a <= 0 or b <= 0:
        raise PreconditionError('lattice steps a and b must be positive')
    _check_painless_regime(w, a, b)
    lo, hi = w.support
    k_lo = int(math.floor(-hi / a)) - 1
    k_hi = int(math.ceil((a - lo) / a)) + 1
    energy = _shifted_energy(w, a * np.arange(k_lo, k_hi + 1))
    breaks = np.mod(np.array([lo, hi]), a)
    eps = 1e-9 * a
    extra = np.concatenate([breaks - eps, breaks + eps])
    inf, sup = essential_extremes(energy, 0.0, a, extra=extra, label='painless')
    if inf <= 1e-14:
        raise PreconditionError('not a frame (covering fails): the periodized energy vanishes')
    return _log_bounds(FrameBounds(inf / b, sup / b, BoundsProvenance.PAINLESS, optimal=True),
                       w, a=a, b=b)


def nsgf_multiplier_bounds(w: Window, a: float, b: float,
                           column_deltas: Mapping[int, float]) -> FrameBounds:
    """
    Ess-inf and ess-sup of (1/b)·Σ_k |h(x - a(k + δ_k))|², the diagonal frame
    operator of a painless system whose columns are jittered by δ_k (zero for
    columns not listed). The scan covers every listed column plus one
    unperturbed period on each side.
    """
    _check_painless_regime(w, a, b)
    deltas = {int(k): float(v) for k, v in column_deltas.items()}
    lo, hi = w.support
    if deltas:
        first, last = min(deltas), max(deltas)
    else:
        first = last = 0
    x_lo = a * (first - 1) + lo
    x_hi = a * (last + 1) + hi
    k_lo = int(math.floor((x_lo - hi) / a)) - 2
    k_hi = int(math.ceil((x_hi - lo) / a)) + 2
    ks = np.arange(k_lo, k_hi + 1)
    shifts = a * (ks + np.array([deltas.get(int(k), 0.0) for k in ks]))
    energy = _shifted_energy(w, shifts)
    eps = 1e-9 * a
    breaks = np.concatenate([shifts + lo, shifts + hi])
    breaks = breaks[(breaks >= x_lo) & (breaks <= x_hi)]
    extra = np.concatenate([breaks - eps, breaks + eps])
    n = SCAN_POINTS * max(1, int(math.ceil((x_hi - x_lo) / a)))
    inf, sup = essential_extremes(energy, x_lo, x_hi, n=n, extra=extra, label='nsgf multiplier')
    if inf <= 1e-14:
        raise PreconditionError('not a frame (covering fails): jittered columns leave a gap')
    return _log_bounds(FrameBounds(inf / b, sup / b, BoundsProvenance.PAINLESS, optimal=True),
                       w, a=a, b=b, jittered_columns=len(deltas))


# -- Fourier side ----------------------------------------------------------------

def fourier_decay(w: Window) -> Optional[Tuple[float, float]]:
    """(C, d) with |ĥ(s)| <= C·(π|s|)^{-d}, for the windows that have one."""
    if w.kind is WindowKind.RECT:
        return 1.0, 1.0
    if w.kind is WindowKind.BSPLINE:
        return 1.0, float(w.order)
    if w.kind is WindowKind.DERIVATIVE and w.base.kind is WindowKind.BSPLINE:
        return 2.0, float(w.base.order - 1)
    return None


def spectrum_magnitude(w: Window, b: float) -> Tuple[Callable[[np.ndarray], np.ndarray], Optional[float]]:
    """|ĥ| as a vectorized callable and the largest frequency it resolves."""
    if w.kind is not WindowKind.SAMPLED:
        return (lambda s: np.abs(fourier_eval(w, s))), None
    dx = w.dx
    n = 1 << int(math.ceil(math.log2(max(8 * w.values.size, 256.0 / (b * dx)))))
    n = min(n, 1 << 22)
    padded = np.zeros(n, dtype=complex)
    padded[:w.values.size] = w.values
    freqs = np.fft.fftshift(np.fft.fftfreq(n, d=dx))
    magnitude = np.abs(np.fft.fftshift(dx * n * np.fft.ifft(padded)))
    return (lambda s: np.interp(s, freqs, magnitude, left=0.0, right=0.0)), 0.5 / dx


def _effective_truncation(w: Window, b: float, trunc: int,
                          nyquist: Optional[float]) -> Tuple[int, bool]:
    """Truncation actually used and whether it captures the sum exactly."""
    if w.band_limit is not None:
        return int(math.ceil(w.band_limit / b)) + 1, True
    if nyquist is not None:
        limit = int(math.floor(nyquist / b)) - 1
        if limit < 2:
            raise PreconditionError('sampled window too coarse for the Fourier-side sum')
        return min(int(trunc), limit), False
    return int(trunc), False


def _periodized_power(magnitude: Callable[[np.ndarray], np.ndarray], b: float, q: float,
                      k_inner: int, k_outer: int):
    """
    Returns (inner, outer) callables: Σ_{|k|<=k_inner} and Σ_{|k|<=k_outer}
    of |ĥ(x - bk)|^q, sharing the inner part.
    """
    def partial(x: np.ndarray, ks: np.ndarray) -> np.ndarray:
        out = np.zeros(x.size)
        chunk = max(1, (1 << 22) // max(1, x.size))
        for start in range(0, ks.size, chunk):
            part = ks[start:start + chunk]
            out += np.sum(magnitude(x[:, None] - b * part[None, :]) ** q, axis=1)
        return out

    inner_ks = np.arange(-k_inner, k_inner + 1)
    outer_ks = np.concatenate([np.arange(-k_outer, -k_inner), np.arange(k_inner + 1, k_outer + 1)])

    def both(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        inner = partial(x, inner_ks)
        return inner, inner + partial(x, outer_ks)

    return both


def _analytic_tail(w: Window, b: float, q: float, K: int) -> float:
    """Upper bound on Σ_{|k|>K} |ĥ(x - bk)|^q uniformly in x ∈ [0, b)."""
    decay = fourier_decay(w)
    if decay is None:
        return 0.0
    C, d = decay
    exponent = q * d
    if exponent <= 1:
        raise PreconditionError(
            f'non-convergent tail: |ĥ|^{q:g} decays like |s|^-{exponent:g}'
        )
    return 2.0 * C ** q * (math.pi * b) ** (-exponent) * float(zeta(exponent, K))


def _periodized_extremes(w: Window, b: float, q: float, trunc: int, label: str):
    magnitude, nyquist = spectrum_magnitude(w, b)
    K, exact = _effective_truncation(w, b, trunc, nyquist)
    half = max(1, K // 2)
    both = _periodized_power(magnitude, b, q, half, K)
    probe = np.arange(SCAN_POINTS // 4) * b / (SCAN_POINTS // 4)
    inner, outer = both(probe)
    if not exact:
        drift = float(np.max(np.abs(outer - inner)))
        scale = max(float(np.max(outer)), 1e-300)
        # With a known decay rate the terms between K/2 and K must respect the tail bound.
        allowed = TAIL_RTOL * scale
        if fourier_decay(w) is not None:
            allowed += _analytic_tail(w, b, q, half)
        if drift > allowed:
            logger.warning(json.dumps({"event": "fourier_tail_divergent", "label": label,
                                       "window": w.label, "trunc": K, "drift": drift / scale}))
            raise ConvergenceError(f'{label}: tail not convergent at truncation {K}',
                                   residual=drift / scale, iterations=K)
    inf, sup = essential_extremes(lambda x: both(x)[1], 0.0, b, n=SCAN_POINTS // 8,
                                  polish=True, label=label)
    tail = 0.0 if exact else _analytic_tail(w, b, q, K)
    return inf, sup, tail, K


def fourier_side_bounds(w: Window, a: float, b: float, trunc: int = FOURIER_TRUNCATION) -> FrameBounds:
    """
    A = (1/a)·inf_x Σ_k |ĥ(x - bk)|², B = (1/a)·sup_x of the same sum.

    These are the optimal bounds when the system is painless; the analytic
    tail beyond the truncation is added to B.
    """
    if a <= 0 or b <= 0:
        raise PreconditionError('lattice steps a and b must be positive')
    if a * b > 1 + DENSITY_SLACK:
        raise PreconditionError(f'necessary density condition violated: ab = {a * b:g} > 1')
    inf, sup, tail, K = _periodized_extremes(w, b, 2.0, trunc, 'fourier-side')
    if inf <= 1e-14:
        raise PreconditionError('not a frame (covering fails): the periodized spectrum vanishes')
    bounds = FrameBounds(inf / a, (sup + tail) / a, BoundsProvenance.FOURIER_SIDE, optimal=True)
    return _log_bounds(bounds, w, a=a, b=b, trunc=K, tail=tail)


# -- special cases and transformations ----------------------------------------------

def rect_bounds(a: float, b: float) -> FrameBounds:
    """
    A = 1/b and B = ⌈1/a⌉/b for G(rect; a, b).

    ⌈1/a⌉ is the largest number of translates covering a point, so it equals
    ⌊1/a⌋ whenever 1/a is an integer.
    """
    if a <= 0 or b <= 0:
        raise PreconditionError('lattice steps a and b must be positive')
    if a > 1 + REGIME_SLACK:
        raise PreconditionError(f'rect support condition violated: a = {a:g} > 1')
    if a * b > 1 + DENSITY_SLACK:
        raise PreconditionError(f'necessary density condition violated: ab = {a * b:g} > 1')
    inverse = 1.0 / a
    cover = int(math.ceil(inverse - 1e-12))
    if abs(inverse - round(inverse)) > 1e-12:
        logger.info(json.dumps({"event": "rect_bounds_noninteger_density", "a": a, "cover": cover}))
    return _log_bounds(FrameBounds(1.0 / b, cover / b, BoundsProvenance.RECT_SPECIAL), None, a=a, b=b)


def rescale_bounds(bounds: FrameBounds, a: float) -> FrameBounds:
    """Bounds of G(h_a; 1, ab) from those of G(h; a, b): divide by a."""
    if a <= 0:
        raise PreconditionError('rescaling factor a must be positive')
    return FrameBounds(bounds.A / a, bounds.B / a, BoundsProvenance.RESCALED, bounds.optimal)


def compute_N_h(w: Window, b: float, trunc: int = NH_TRUNCATION,
                convention: str = 'proof') -> NhValue:
    """
    N(h) = sup over x ∈ [0, b) of Σ_{|k|<=trunc} |ĥ(x + kb)|^{4/3}, raised to 3/4
    under the 'proof' convention. For windows with a known decay rate the
    analytic tail bound is added before the outer power.
    """
    if b <= 0:
        raise PreconditionError('frequency step b must be positive')
    if convention not in ('proof', 'lemma'):
        raise PreconditionError(f"unknown N(h) convention '{convention}'")
    _, sup, tail, K = _periodized_extremes(w, b, NH_EXPONENT, trunc, 'N(h)')
    raw = sup + tail
    value = raw ** 0.75 if convention == 'proof' else raw
    result = NhValue(value, b, convention, K, {"lemma_value": raw, "tail_bound": tail})
    logger.info(json.dumps({"event": "nh_computed", "window": w.label, **result.to_dict()}))
    return result


def bspline_bound_recursion(A: float, B: float, a: float, Nh: NhValue, p: int,
                            c: Optional[float] = None, b: Optional[float] = None) -> FrameBounds:
    """
    Bounds for G(h^(p); pa, b/p) from bounds (A, B) of G(h; a, b).

    Lower bound through the primed chain A'_1 = aA,
    A'_{j+1} = ((A'_j)^{1/j} / N(h))^{2(j+1)}, A_p = A'_p / a.
    Upper bound B_p = a^{p-1} B^p.
    """
    p = int(p)
    if p < 1:
        raise PreconditionError('convolution power p must be >= 1')
    if not (0 < A <= B):
        raise PreconditionError('input bounds must satisfy 0 < A <= B')
    if a <= 0:
        raise PreconditionError('time step a must be positive')
    if Nh.value <= 0:
        raise PreconditionError('N(h) must be positive')
    if b is not None and abs(Nh.b - b) > 1e-12 * max(1.0, abs(b)):
        raise PreconditionError(f'N(h) was computed for b={Nh.b:g}, not b={b:g}')
    if c is not None and b is not None:
        if p * a > p * c * (1 + REGIME_SLACK) or p * c > (p / b) * (1 + REGIME_SLACK):
            raise PreconditionError(
                f'painless regime violated for the convolved window: need pa <= pc <= p/b '
                f'(a={a:g}, c={c:g}, b={b:g}, p={p})'
            )
    primed = a * A
    for j in range(1, p):
        primed = (primed ** (1.0 / j) / Nh.value) ** (2 * (j + 1))
    A_p = primed / a
    B_p = a ** (p - 1) * B ** p
    if A_p > B_p:
        raise PreconditionError(
            f'recursion produced A_p={A_p:g} > B_p={B_p:g}; check the N(h) convention and inputs'
        )
    return _log_bounds(FrameBounds(A_p, B_p, BoundsProvenance.BSPLINE_RECURSION), None,
                       p=p, a=a, nh=Nh.value, convention=Nh.convention)
