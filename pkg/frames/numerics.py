"""
Discretized frame-operator oracle.

A Gabor system is sampled on a GridSpec; inner products are Δx-weighted sums.
Atoms that share an envelope differ only by a modulation e^{2πi·order·step·j},
so each group is analysed and synthesised with one FFT of length 1/step.
Extremal eigenvalues of the frame operator are estimated on a small interior
test subspace, away from index-truncation edges.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import zeta

from .bounds import fourier_decay, spectrum_magnitude
from .exceptions import ConvergenceError, PreconditionError
from .gabor import GaborLattice, JitterPattern
from .grids import GridSpec
from .windows import (
    Window,
    autocorrelation,
    eval_window,
    fourier_eval,
    fourier_transform,
)


logger = logging.getLogger('frames')

EIGEN_TOLERANCE = 1e-8
EIGEN_MAX_ITERATIONS = 10 ** 4
POISSON_TRUNCATION = 2 ** 16


# -- discretization ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AtomBlock:
    """
    Atoms sharing one envelope: atom i at grid index j is
    phases[i]·envelope[j - start]·e^{2πi·orders[i]·step·j}.
    """
    tags: Tuple[Tuple[int, int], ...]
    envelope: np.ndarray
    start: int
    orders: np.ndarray
    phases: np.ndarray
    step: float
    n_points: int

    def __post_init__(self):
        period = self.period
        if period is not None:
            residues = np.mod(self.orders, period)
            if np.unique(residues).size != residues.size:
                raise PreconditionError(
                    f"modulation index range exceeds the grid's discrete period {period}"
                )

    @property
    def period(self) -> Optional[int]:
        inverse = 1.0 / self.step
        rounded = round(inverse)
        if rounded >= 1 and abs(inverse - rounded) <= 1e-9 * inverse:
            return int(rounded)
        return None

    @property
    def indices(self) -> np.ndarray:
        return self.start + np.arange(self.envelope.size)

    def matrix(self) -> np.ndarray:
        waves = np.exp(2j * np.pi * self.step * np.outer(self.orders, self.indices))
        return self.phases[:, None] * self.envelope[None, :] * waves

    def analyze(self, F: np.ndarray, dx: float) -> np.ndarray:
        """(B, N) samples -> (B, m) coefficients Δx·Σ_j f_j·conj(atom_j)."""
        window = F[:, self.start:self.start + self.envelope.size] * np.conj(self.envelope)
        P = self.period
        if P is None:
            return dx * F[:, self.start:self.start + self.envelope.size] @ np.conj(self.matrix()).T
        folded = _fold(window, P)
        spectrum = np.fft.fft(folded, axis=-1)
        residues = np.mod(self.orders, P)
        offset = np.exp(-2j * np.pi * self.orders * self.start / P)
        return dx * np.conj(self.phases) * offset * spectrum[:, residues]

    def synthesize(self, C: np.ndarray) -> np.ndarray:
        """(B, m) coefficients -> (B, N) samples Σ_i c_i·atom_i."""
        out = np.zeros((C.shape[0], self.n_points), dtype=complex)
        P = self.period
        if P is None:
            out[:, self.start:self.start + self.envelope.size] = C @ self.matrix()
            return out
        bins = np.zeros((C.shape[0], P), dtype=complex)
        residues = np.mod(self.orders, P)
        offset = np.exp(2j * np.pi * self.orders * self.start / P)
        bins[:, residues] = C * self.phases * offset
        waves = P * np.fft.ifft(bins, axis=-1)
        reps = -(-self.envelope.size // P)
        tiled = np.tile(waves, (1, reps))[:, :self.envelope.size]
        out[:, self.start:self.start + self.envelope.size] = tiled * self.envelope
        return out


def _fold(values: np.ndarray, period: int) -> np.ndarray:
    """Sum (B, L) samples into (B, period) bins by index modulo period."""
    length = values.shape[-1]
    padded_length = -(-length // period) * period
    if padded_length != length:
        values = np.concatenate(
            [values, np.zeros((values.shape[0], padded_length - length), dtype=values.dtype)], axis=-1)
    return values.reshape(values.shape[0], padded_length // period, period).sum(axis=1)


@dataclass(frozen=True, eq=False)
class DiscretizedSystem:
    blocks: Tuple[AtomBlock, ...]
    grid: GridSpec
    lattice: GaborLattice
    pattern_digest: str
    domain: str = 'time'
    window: str = ''
    interior_margin: float = 0.0
    extent: Tuple[float, float] = (0.0, 0.0)

    @property
    def num_atoms(self) -> int:
        return sum(len(block.tags) for block in self.blocks)

    @property
    def tags(self) -> List[Tuple[int, int]]:
        return [tag for block in self.blocks for tag in block.tags]

    def to_dict(self) -> dict:
        return {"domain": self.domain, "window": self.window, "atoms": self.num_atoms,
                "grid": self.grid.to_dict(), "lattice": self.lattice.to_dict(),
                "pattern_digest": self.pattern_digest}


def _slice_indices(grid: GridSpec, lo: float, hi: float) -> Tuple[int, int]:
    """Index range [start, stop) covering every grid point in [lo, hi]."""
    start = int(math.floor((lo - grid.first_point) / grid.dx)) - 1
    stop = int(math.ceil((hi - grid.first_point) / grid.dx)) + 2
    return max(0, start), min(grid.n_points, stop)


def _overflow(n: int, k: int, lo: float, hi: float, grid: GridSpec) -> PreconditionError:
    return PreconditionError(
        f'support overflow at atom (n={n}, k={k}): [{lo:g}, {hi:g}] is not inside '
        f'the grid [{grid.x_min:g}, {grid.x_max:g}]'
    )


def _time_blocks(w: Window, lattice: GaborLattice, pattern: JitterPattern, grid: GridSpec,
                 margin: float) -> List[AtomBlock]:
    if not w.is_compact:
        raise PreconditionError(
            'window has unbounded support; discretize it in the frequency domain'
        )
    lo, hi = w.support
    groups: Dict[Tuple[int, float], List[int]] = {}
    for k in lattice.k_indices:
        for n in lattice.n_indices:
            delta = pattern.delta(int(n), int(k))
            shift = lattice.a * (k + delta)
            if not grid.contains(shift + lo, shift + hi, margin):
                raise _overflow(int(n), int(k), shift + lo, shift + hi, grid)
            groups.setdefault((int(k), delta), []).append(int(n))
    x0 = grid.first_point
    blocks = []
    for (k, delta), ns in groups.items():
        shift = lattice.a * (k + delta)
        start, stop = _slice_indices(grid, shift + lo, shift + hi)
        x = x0 + np.arange(start, stop) * grid.dx
        envelope = np.asarray(eval_window(w, x - shift), dtype=complex)
        orders = np.array(ns)
        phases = np.exp(2j * np.pi * lattice.b * orders * x0)
        blocks.append(AtomBlock(tuple((n, k) for n in ns), envelope, start, orders, phases,
                                lattice.b * grid.dx, grid.n_points))
    return blocks


def _frequency_blocks(w: Window, lattice: GaborLattice, pattern: JitterPattern, grid: GridSpec,
                      half_width: Optional[float], margin: float) -> List[AtomBlock]:
    if w.band_limit is not None:
        reach = w.band_limit
    elif half_width is not None:
        reach = float(half_width)
    else:
        raise PreconditionError(
            'frequency-domain discretization needs band_limit metadata or a half_width'
        )
    groups: Dict[Tuple[int, float], List[int]] = {}
    for n in lattice.n_indices:
        center = -lattice.b * n
        if not grid.contains(center - reach, center + reach, margin):
            raise _overflow(int(n), int(lattice.k_range[0]), center - reach, center + reach, grid)
        for k in lattice.k_indices:
            delta = pattern.delta(int(n), int(k))
            groups.setdefault((int(n), delta), []).append(int(k))
    s0 = grid.first_point
    blocks = []
    for (n, delta), ks in groups.items():
        center = -lattice.b * n
        if w.band_limit is not None:
            start, stop = _slice_indices(grid, center - reach, center + reach)
        else:
            start, stop = 0, grid.n_points
        s = s0 + np.arange(start, stop) * grid.dx
        moved = s + lattice.b * n
        envelope = np.asarray(fourier_eval(w, moved), dtype=complex) * \
            np.exp(2j * np.pi * moved * lattice.a * delta)
        orders = np.array(ks)
        phases = np.exp(2j * np.pi * (s0 + lattice.b * n) * lattice.a * orders)
        blocks.append(AtomBlock(tuple((n, k) for k in ks), envelope, start, orders, phases,
                                lattice.a * grid.dx, grid.n_points))
    return blocks


def discretize(w: Window, lattice: GaborLattice, pattern: JitterPattern, grid: GridSpec,
               domain: str = 'time', half_width: Optional[float] = None,
               margin: float = 0.0) -> DiscretizedSystem:
    """
    Sample every atom of the truncated system on the grid.

    domain='time' samples e^{2πibnx} h(x - a(k + δ)); domain='frequency'
    samples the Fourier transforms e^{2πi(s + bn)a(k + δ)} ĥ(s + bn), whose
    envelope extent is the band limit or, failing that, half_width.
    """
    if domain == 'time':
        blocks = _time_blocks(w, lattice, pattern, grid, margin)
        extent = w.support
    elif domain == 'frequency':
        blocks = _frequency_blocks(w, lattice, pattern, grid, half_width, margin)
        reach = w.band_limit if w.band_limit is not None else float(half_width)
        extent = (-reach, reach)
    else:
        raise PreconditionError(f"unknown domain '{domain}'")
    system = DiscretizedSystem(tuple(blocks), grid, lattice, pattern.digest(), domain,
                               w.label, margin, tuple(extent))
    logger.info(json.dumps({"event": "system_discretized", "domain": domain, "window": w.label,
                            "atoms": system.num_atoms, "blocks": len(blocks),
                            "n_points": grid.n_points}))
    return system


def _as_batch(system: DiscretizedSystem, values) -> Tuple[np.ndarray, Tuple[int, ...]]:
    arr = system.grid.check_samples(np.asarray(values))
    lead = arr.shape[:-1]
    return arr.reshape(-1, arr.shape[-1]).astype(complex), lead


def analyze(system: DiscretizedSystem, values) -> np.ndarray:
    """Coefficients ⟨f, atom⟩ for every atom, shape (..., num_atoms)."""
    F, lead = _as_batch(system, values)
    parts = [block.analyze(F, system.grid.dx) for block in system.blocks]
    coeffs = np.concatenate(parts, axis=-1) if parts else np.zeros((F.shape[0], 0), dtype=complex)
    return coeffs.reshape(lead + (coeffs.shape[-1],))


def synthesize(system: DiscretizedSystem, coeffs) -> np.ndarray:
    """Σ_i c_i·atom_i, shape (..., n_points)."""
    C = np.asarray(coeffs, dtype=complex)
    if C.shape[-1] != system.num_atoms:
        raise PreconditionError(
            f'expected {system.num_atoms} coefficients, got {C.shape[-1]}'
        )
    lead = C.shape[:-1]
    C = C.reshape(-1, C.shape[-1])
    out = np.zeros((C.shape[0], system.grid.n_points), dtype=complex)
    offset = 0
    for block in system.blocks:
        m = len(block.tags)
        out += block.synthesize(C[:, offset:offset + m])
        offset += m
    return out.reshape(lead + (system.grid.n_points,))


def frame_operator_apply(system: DiscretizedSystem, values) -> np.ndarray:
    """Sf = Σ ⟨f, atom⟩·atom."""
    return synthesize(system, analyze(system, values))


# -- empirical frame bounds ------------------------------------------------------------

@dataclass(frozen=True)
class TestSubspace:
    """
    Span of `modes` exponentials e^{2πij(x - center)/width}, j ∈ [-modes/2, modes/2),
    cut to |x - center| <= width/2 by a box or Hann taper.
    """
    __test__ = False

    center: float
    width: float
    modes: int
    taper: str = 'box'

    def __post_init__(self):
        if self.width <= 0 or self.modes < 1:
            raise PreconditionError('test subspace needs a positive width and at least one mode')
        if self.taper not in ('box', 'hann'):
            raise PreconditionError(f"unknown taper '{self.taper}'")

    @property
    def band_limit(self) -> float:
        return self.modes / (2.0 * self.width)

    def basis(self, grid: GridSpec) -> np.ndarray:
        """(modes, n_points) samples, orthonormal for the Δx inner product."""
        x = grid.points - self.center
        inside = np.abs(x) <= self.width / 2
        if np.count_nonzero(inside) < self.modes:
            raise PreconditionError('test subspace has fewer grid points than modes')
        if not grid.contains(self.center - self.width / 2, self.center + self.width / 2):
            raise PreconditionError('test subspace extends beyond the grid')
        if self.taper == 'hann':
            taper = np.where(inside, np.cos(np.pi * x / self.width) ** 2, 0.0)
        else:
            taper = inside.astype(float)
        js = np.arange(-(self.modes // 2), self.modes - self.modes // 2)
        modes = taper[None, :] * np.exp(2j * np.pi * np.outer(js, x) / self.width)
        q, _ = np.linalg.qr(math.sqrt(grid.dx) * modes.T)
        return q.T / math.sqrt(grid.dx)

    def to_dict(self) -> dict:
        return {"center": self.center, "width": self.width, "modes": self.modes,
                "taper": self.taper}


@dataclass(frozen=True)
class EmpiricalBounds:
    lambda_min: float
    lambda_max: float
    iterations: Tuple[int, int]
    residuals: Tuple[float, float]
    grid: dict = field(default_factory=dict)
    truncation: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.lambda_min <= self.lambda_max:
            raise PreconditionError('empirical bounds must satisfy 0 <= lambda_min <= lambda_max')

    def to_dict(self) -> dict:
        return {"lambda_min": self.lambda_min, "lambda_max": self.lambda_max,
                "iters": list(self.iterations), "residuals": list(self.residuals),
                "grid": self.grid, "truncation": self.truncation}


def compressed_operator(system: DiscretizedSystem, subspace: TestSubspace) -> np.ndarray:
    """Hermitian matrix T_ij = ⟨S q_j, q_i⟩ over the subspace basis."""
    basis = subspace.basis(system.grid)
    C = analyze(system, basis)
    T = np.conj(C) @ C.T
    return 0.5 * (T + np.conj(T.T))


def interior_condition(system: DiscretizedSystem, subspace: TestSubspace) -> bool:
    """
    Modulations must span twice the subspace band limit and the shifts must
    cover the subspace support widened by the envelope extent on both sides.
    """
    L = system.lattice
    if system.domain == 'time':
        mod_step, mod_range, shift_step, shift_range = L.b, L.n_range, L.a, L.k_range
    else:
        mod_step, mod_range, shift_step, shift_range = L.a, L.k_range, L.b, L.n_range
    spread = mod_step * (mod_range[1] - mod_range[0] + 1)
    lo_ext, hi_ext = system.extent
    reach = hi_ext - lo_ext
    if system.domain == 'time':
        covered = (shift_step * shift_range[0], shift_step * shift_range[1])
    else:
        covered = (-shift_step * shift_range[1], -shift_step * shift_range[0])
    needed = (subspace.center - subspace.width / 2 - reach, subspace.center + subspace.width / 2 + reach)
    holds = spread >= 2 * subspace.band_limit and covered[0] <= needed[0] and covered[1] >= needed[1]
    if not holds:
        logger.warning(json.dumps({"event": "interior_condition_violated", "domain": system.domain,
                                   "modulation_span": spread, "covered": list(covered),
                                   "needed": list(needed)}))
    return holds


def top_eigenvalue(T: np.ndarray, tol: float = EIGEN_TOLERANCE,
                   max_iter: int = EIGEN_MAX_ITERATIONS, seed: int = 0,
                   scale: Optional[float] = None) -> Tuple[float, int, float]:
    """
    Largest eigenvalue of a Hermitian positive semidefinite matrix.

    Power iteration whose iterated operator is squared (and renormalised)
    after every step, stopped when ‖Tv - θv‖ <= tol·scale for the Rayleigh
    quotient θ. Returns (θ, iterations, residual).
    """
    rng = np.random.default_rng(seed)
    dim = T.shape[0]
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    power = T.copy()
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        w = power @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, iteration, 0.0
        v = w / norm
        Tv = T @ v
        theta = float(np.real(np.vdot(v, Tv)))
        residual = float(np.linalg.norm(Tv - theta * v))
        limit = tol * (scale if scale is not None else abs(theta))
        if residual <= limit:
            return theta, iteration, residual
        power = power @ power
        size = np.linalg.norm(power)
        if size == 0.0 or not np.isfinite(size):
            break
        power /= size
    logger.warning(json.dumps({"event": "power_iteration_failed", "residual": residual,
                               "iterations": max_iter}))
    raise ConvergenceError('power iteration did not converge', residual=residual, iterations=max_iter)


def empirical_frame_bounds(system: DiscretizedSystem, subspace: TestSubspace,
                           tol: float = EIGEN_TOLERANCE, max_iter: int = EIGEN_MAX_ITERATIONS,
                           seed: int = 0) -> EmpiricalBounds:
    """λ_min and λ_max of the frame operator compressed to the test subspace."""
    T = compressed_operator(system, subspace)
    interior = interior_condition(system, subspace)
    lam_max, it_max, res_max = top_eigenvalue(T, tol, max_iter, seed)
    if lam_max <= 0.0:
        lam_min, it_min, res_min = 0.0, 0, 0.0
        lam_max = 0.0
    else:
        shifted = lam_max * np.eye(T.shape[0]) - T
        mu, it_min, res_min = top_eigenvalue(shifted, tol, max_iter, seed + 1, scale=lam_max)
        lam_min = min(max(lam_max - mu, 0.0), lam_max)
    result = EmpiricalBounds(
        lam_min, lam_max, (it_min, it_max), (res_min, res_max), system.grid.to_dict(),
        {"domain": system.domain, "n_range": list(system.lattice.n_range),
         "k_range": list(system.lattice.k_range), "subspace": subspace.to_dict(),
         "interior_condition": interior},
    )
    logger.info(json.dumps({"event": "power_iteration_converged", "lambda_min": lam_min,
                            "lambda_max": lam_max, "iterations": [it_min, it_max]}))
    return result


# -- STFT ----------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class STFTResult:
    xi: np.ndarray
    t: np.ndarray
    values: np.ndarray


def _shift_counts(t, grid: GridSpec) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = np.round(t / grid.dx)
    if np.any(np.abs(m * grid.dx - t) > 1e-9 * grid.dx + 1e-12 * np.abs(t)):
        raise PreconditionError('time shifts must be multiples of the grid step')
    return m.astype(int)


def _shifted(g: np.ndarray, m: int) -> np.ndarray:
    """Samples of s -> g(s - mΔx), zero outside the grid."""
    out = np.zeros_like(g)
    if abs(m) >= g.size:
        return out
    if m >= 0:
        out[m:] = g[:g.size - m]
    else:
        out[:m] = g[-m:]
    return out


def stft(f, g, grid: GridSpec, xi=None, t=None) -> STFTResult:
    """
    (F^g f)(ξ, t) = ∫ e^{-2πiξs} f(s) g(s - t) ds for t on the grid lattice.

    Without xi the transform is taken by FFT at the natural frequencies
    q/(N·Δx) in FFT order; otherwise by direct summation.
    """
    f = grid.check_samples(np.asarray(f, dtype=complex))
    g = grid.check_samples(np.asarray(g, dtype=complex))
    shifts = _shift_counts(0.0 if t is None else t, grid)
    s = grid.points
    products = np.stack([f * _shifted(g, int(m)) for m in shifts])
    if xi is None:
        freqs = np.fft.fftfreq(grid.n_points, d=grid.dx)
        values = grid.dx * np.exp(-2j * np.pi * freqs * s[0])[None, :] * np.fft.fft(products, axis=-1)
    else:
        freqs = np.atleast_1d(np.asarray(xi, dtype=float))
        values = grid.dx * products @ np.exp(-2j * np.pi * np.outer(s, freqs))
    return STFTResult(freqs, shifts * grid.dx, values)


def _overlap_shifts(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Shifts m for which f·g(· - mΔx) can be nonzero."""
    f_idx = np.flatnonzero(f)
    g_idx = np.flatnonzero(g)
    if f_idx.size == 0 or g_idx.size == 0:
        return np.zeros(0, dtype=int)
    return np.arange(f_idx[0] - g_idx[-1], f_idx[-1] - g_idx[0] + 1)


def _stft_inner(f1, g1, f2, g2, grid: GridSpec, chunk: int = 64) -> complex:
    """Σ_t Σ_ξ F^{g1}f1 · conj(F^{g2}f2) Δξ Δt over every overlapping shift."""
    shifts = np.union1d(_overlap_shifts(f1, g1), _overlap_shifts(f2, g2))
    dxi = 1.0 / (grid.n_points * grid.dx)
    total = 0.0 + 0.0j
    for start in range(0, shifts.size, chunk):
        part = shifts[start:start + chunk] * grid.dx
        one = stft(f1, g1, grid, t=part).values
        two = stft(f2, g2, grid, t=part).values
        total += np.sum(one * np.conj(two))
    return complex(total * dxi * grid.dx)


@dataclass(frozen=True)
class PlancherelResiduals:
    energy: float
    cross: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"energy": self.energy, "cross": list(self.cross)}


def plancherel_check(f, g, grid: GridSpec,
                     pairs: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = ()) -> PlancherelResiduals:
    """
    Relative residuals of ‖F^g f‖² = ‖f‖²‖g‖² and, for each (f1, f2, g1, g2),
    of ⟨F^{g1}f1, F^{g2}f2⟩ = ⟨f1, f2⟩⟨g1, g2⟩ normalised by the four norms.
    """
    f = grid.check_samples(np.asarray(f, dtype=complex))
    g = grid.check_samples(np.asarray(g, dtype=complex))
    expected = grid.norm(f) ** 2 * grid.norm(g) ** 2
    energy = _stft_inner(f, g, f, g, grid).real
    energy_residual = 0.0 if expected == 0 and energy == 0 else abs(energy - expected) / max(expected, 1e-300)
    cross = []
    for f1, f2, g1, g2 in pairs:
        f1, f2, g1, g2 = (grid.check_samples(np.asarray(v, dtype=complex)) for v in (f1, f2, g1, g2))
        scale = grid.norm(f1) * grid.norm(f2) * grid.norm(g1) * grid.norm(g2)
        if scale == 0:
            cross.append(0.0)
            continue
        lhs = _stft_inner(f1, g1, f2, g2, grid)
        rhs = grid.inner(f1, f2) * grid.inner(g1, g2)
        cross.append(abs(lhs - rhs) / scale)
    return PlancherelResiduals(float(energy_residual), tuple(cross))


@dataclass(frozen=True)
class SamplingResiduals:
    t: Tuple[float, ...]
    lhs: Tuple[float, ...]
    rhs: Tuple[float, ...]
    residuals: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {"t": list(self.t), "lhs": list(self.lhs), "rhs": list(self.rhs),
                "residuals": list(self.residuals)}


def _relative(lhs: float, rhs: float) -> float:
    if lhs == 0 and rhs == 0:
        return 0.0
    return abs(lhs - rhs) / max(abs(rhs), abs(lhs), 1e-300)


def stft_sampling_check(f, g: Window, grid: GridSpec, P: float, t) -> SamplingResiduals:
    """
    Σ_n |F^g f(Pn, t)|² against (1/P)∫|f(s)|²|g(s - t)|² ds, with the n-sum
    over one discrete period 1/(PΔx).
    """
    if not g.is_compact or g.support[0] < -0.5 - 1e-12 or g.support[1] > 0.5 + 1e-12:
        raise PreconditionError('STFT sampling needs g supported in [-1/2, 1/2]')
    if not 0 < P <= 1:
        raise PreconditionError(f'STFT sampling needs 0 < P <= 1, got P={P:g}')
    Q = 1.0 / (P * grid.dx)
    if abs(Q - round(Q)) > 1e-9 * Q:
        raise PreconditionError('1/(P·Δx) must be an integer')
    Q = int(round(Q))
    f = grid.check_samples(np.asarray(f, dtype=complex))
    s = grid.points
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    lhs, rhs, res = [], [], []
    for shift in ts:
        h = f * np.asarray(eval_window(g, s - shift))
        folded = _fold(h[None, :], Q)[0]
        samples = grid.dx * np.fft.fft(folded)
        left = float(np.sum(np.abs(samples) ** 2))
        right = float(np.sum(np.abs(h) ** 2) * grid.dx / P)
        lhs.append(left)
        rhs.append(right)
        res.append(_relative(left, right))
    return SamplingResiduals(tuple(ts.tolist()), tuple(lhs), tuple(rhs), tuple(res))


# -- Poisson summation -------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonResiduals:
    y: Tuple[float, ...]
    lhs: Tuple[float, ...]
    autocorrelation_rhs: Optional[Tuple[float, ...]]
    autocorrelation_residuals: Optional[Tuple[float, ...]]
    norm_rhs: Optional[float]
    norm_residuals: Optional[Tuple[float, ...]]
    tail_bound: float
    truncation: int

    def to_dict(self) -> dict:
        def listed(values):
            return list(values) if values is not None else None

        return {"y": list(self.y), "lhs": list(self.lhs),
                "autocorrelation_rhs": listed(self.autocorrelation_rhs),
                "autocorrelation_residuals": listed(self.autocorrelation_residuals),
                "norm_rhs": self.norm_rhs, "norm_residuals": listed(self.norm_residuals),
                "tail_bound": self.tail_bound, "truncation": self.truncation}


def _poisson_tail(g: Window, P: float, y: np.ndarray, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    (estimate, bound) for Σ_{|n|>K} |ĝ(y + Pn)|².

    For sinc^p spectra with integer P the estimate is exact; otherwise it is
    half the bound.
    """
    decay = fourier_decay(g)
    if decay is None:
        return np.zeros_like(y), np.zeros_like(y)
    C, d = decay
    q = 2 * d
    if q <= 1:
        raise PreconditionError('non-convergent tail in the Poisson sum')
    ratio = y / P
    envelope = C ** 2 * (math.pi * P) ** (-q) * (zeta(q, K + 1 + ratio) + zeta(q, K + 1 - ratio))
    integer_P = abs(P - round(P)) <= 1e-12 and round(P) >= 1
    if integer_P and C == 1.0:
        exact = np.sin(math.pi * y) ** q * envelope
        return exact, envelope
    return 0.5 * envelope, envelope


def poisson_sum_check(g: Window, P: float, y, trunc: int = POISSON_TRUNCATION) -> PoissonResiduals:
    """
    Σ_n |ĝ(y + Pn)|² against (1/P)·Σ_k R(k/P)e^{2πiky/P} (compact g) and,
    when g lives in a unit interval and P <= 1, against ‖g‖₂²/P.
    """
    if P <= 0:
        raise PreconditionError('Poisson period P must be positive')
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(np.abs(ys) >= P * (trunc + 1)):
        raise PreconditionError('evaluation points exceed the truncated Poisson range')
    magnitude, nyquist = spectrum_magnitude(g, P)
    if g.band_limit is not None:
        K = int(math.ceil((g.band_limit + np.max(np.abs(ys))) / P)) + 1
    elif nyquist is not None:
        K = min(int(trunc), int(math.floor((nyquist - np.max(np.abs(ys))) / P)) - 1)
        if K < 2:
            raise PreconditionError('sampled window too coarse for the Poisson sum')
    else:
        K = int(trunc)
    ns = np.arange(-K, K + 1)
    lhs = np.zeros(ys.size)
    half = np.zeros(ys.size)
    chunk = max(1, (1 << 22) // ns.size)
    for start in range(0, ys.size, chunk):
        part = ys[start:start + chunk]
        terms = magnitude(part[:, None] + P * ns[None, :]) ** 2
        lhs[start:start + chunk] = np.sum(terms, axis=1)
        inner = np.abs(ns) <= K // 2
        half[start:start + chunk] = np.sum(terms[:, inner], axis=1)
    if g.band_limit is None:
        estimate, bound = _poisson_tail(g, P, ys, K)
        if fourier_decay(g) is None:
            drift = np.max(np.abs(lhs - half))
            if drift > 1e-4 * max(float(np.max(lhs)), 1e-300):
                raise ConvergenceError('Poisson sum tail not convergent at truncation',
                                       residual=float(drift), iterations=K)
        lhs = lhs + estimate
        tail_bound = float(np.max(bound))
    else:
        tail_bound = 0.0

    auto_rhs = auto_res = None
    if g.is_compact:
        c = g.support_length
        ks = np.arange(-int(math.ceil(c * P)) - 1, int(math.ceil(c * P)) + 2)
        R = np.asarray(autocorrelation(g, ks / P), dtype=complex)
        phases = np.exp(2j * np.pi * np.outer(ys, ks) / P)
        auto_rhs = tuple(float(v) for v in np.real(phases @ R) / P)
        auto_res = tuple(_relative(float(l), r) for l, r in zip(lhs, auto_rhs))

    norm_rhs = norm_res = None
    if g.is_compact and g.support_length <= 1 + 1e-12 and P <= 1:
        norm_rhs = float(np.real(autocorrelation(g, 0.0))) / P
        norm_res = tuple(_relative(float(l), norm_rhs) for l in lhs)

    result = PoissonResiduals(tuple(ys.tolist()), tuple(lhs.tolist()), auto_rhs, auto_res,
                              norm_rhs, norm_res, tail_bound, K)
    logger.info(json.dumps({"event": "poisson_checked", "window": g.label, "P": P,
                            "points": int(ys.size), "unit_support_gate": norm_rhs is not None}))
    return result


# -- painless multiplier -------------------------------------------------------------------

@dataclass(frozen=True)
class PainlessCheck:
    residual: float
    multiplier_min: float
    multiplier_max: float
    tests: int

    def to_dict(self) -> dict:
        return {"residual": self.residual, "multiplier_min": self.multiplier_min,
                "multiplier_max": self.multiplier_max, "tests": self.tests}


def painless_operator_check(w: Window, lattice: GaborLattice, column_deltas, grid: GridSpec,
                            tests: int = 3, seed: int = 0) -> PainlessCheck:
    """
    ‖Sf - f·(1/b)Σ_k |h_k|²‖ / ‖f‖ for seeded random f, with columns
    h_k = h(· - a(k + δ_k)) and n over one full discrete period.

    multiplier_min/max are taken over the interior [a(k_lo + 1), a(k_hi - 1)].
    """
    if not w.is_compact:
        raise PreconditionError('painless check needs a compactly supported window')
    if w.support_length > (1 / lattice.b) * (1 + 1e-12):
        raise PreconditionError('painless regime violated: support length exceeds 1/b')
    P = 1.0 / (lattice.b * grid.dx)
    if abs(P - round(P)) > 1e-9 * P:
        raise PreconditionError('1/(b·Δx) must be an integer for a full modulation period')
    P = int(round(P))
    deltas = {int(k): float(v) for k, v in dict(column_deltas).items()}
    bound = max((abs(v) for v in deltas.values()), default=0.0)
    pattern = JitterPattern({}, bound, columns=deltas)
    full = lattice.with_ranges(n_range=(-(P // 2), P - P // 2 - 1))
    system = discretize(w, full, pattern, grid)
    x = grid.points
    multiplier = np.zeros(grid.n_points)
    for k in full.k_indices:
        shift = full.a * (k + deltas.get(int(k), 0.0))
        multiplier += np.abs(eval_window(w, x - shift)) ** 2
    multiplier /= full.b
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((tests, grid.n_points)) + 1j * rng.standard_normal((tests, grid.n_points))
    SF = frame_operator_apply(system, F)
    residual = max(float(np.linalg.norm(SF[i] - multiplier * F[i]) / np.linalg.norm(F[i]))
                   for i in range(tests))
    interior = (x >= full.a * (full.k_range[0] + 1)) & (x <= full.a * (full.k_range[1] - 1))
    if not np.any(interior):
        interior = np.ones_like(x, dtype=bool)
    result = PainlessCheck(residual, float(multiplier[interior].min()),
                           float(multiplier[interior].max()), tests)
    logger.info(json.dumps({"event": "painless_operator_checked", "window": w.label,
                            **result.to_dict()}))
    return result


# -- autocorrelation identity -------------------------------------------------------------

def autocorrelation_identity_check(w: Window, grid: GridSpec, frequencies) -> float:
    """
    max_y | |ψ̂(y)|² - (ψ∗ψ₋)^(y) | / max_y |ψ̂(y)|², with ψ₋(x) = conj(ψ(-x)).

    The grid must be symmetric about 0 so that reversing the samples reflects x.
    """
    if abs(grid.x_min + grid.x_max) > 1e-12 * max(1.0, abs(grid.x_max)):
        raise PreconditionError('autocorrelation identity needs a grid symmetric about 0')
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    psi = np.asarray(eval_window(w, grid.points), dtype=complex)
    spectrum = fourier_transform(w, grid, freqs).values
    reflected = np.conj(psi[::-1])
    conv = fftconvolve(psi, reflected) * grid.dx
    positions = 2 * grid.first_point + np.arange(conv.size) * grid.dx
    conv_hat = np.exp(2j * np.pi * np.outer(freqs, positions)) @ conv * grid.dx
    power = np.abs(spectrum) ** 2
    scale = max(float(np.max(power)), 1e-300)
    return float(np.max(np.abs(power - conv_hat)) / scale)
