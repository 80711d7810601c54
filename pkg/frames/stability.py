"""
Stability certificates for jittered Gabor systems.

Every certificate computes a margin, compares it with a threshold taken from
the unperturbed bounds and, when the comparison passes, reports perturbed
bounds (1 - ρ)A and (1 + ρ)B. Pass/fail uses the exact computed margin; no
tolerance is applied.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .bounds import BoundsProvenance, FrameBounds, nsgf_multiplier_bounds
from .exceptions import PreconditionError
from .gabor import JitterPattern, jitter_marginals
from .grids import GridSpec
from .windows import (
    Window,
    WindowKind,
    shift_diff_norm,
    wiener_amalgam_norm,
    window_functionals,
)


logger = logging.getLogger('frames')


class Theorem(str, Enum):
    PALEY_WIENER = 'paley-wiener'
    THM1_COMPACT = 'thm1-compact'
    COR_BSPLINE = 'cor-bspline'
    THM_WIENER_AMALGAM = 'thm-wiener-amalgam'
    THM_BANDLIMITED = 'thm-bandlimited'
    COR_NSGF_OVERLAP = 'cor-nsgf-overlap'


@dataclass(frozen=True)
class StabilityCertificate:
    """
    passed holds exactly when margin < threshold, except for the painless
    overlap certificate: there margin is the largest column step, passing
    allows margin == threshold, and extras["covering"] records whether the
    jittered supports still cover the line. A covering failure fails the
    certificate even when the step condition holds.
    """
    theorem: Theorem
    margin: float
    threshold: float
    passed: bool
    perturbed: Optional[FrameBounds] = None
    notes: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    inputs_digest: str = ''

    def __post_init__(self):
        if self.passed != (self.perturbed is not None):
            raise PreconditionError('perturbed bounds are present exactly when the certificate passes')

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem.value,
            "margin": self.margin,
            "threshold": self.threshold,
            "passed": self.passed,
            "A_prime": self.perturbed.A if self.perturbed else None,
            "B_prime": self.perturbed.B if self.perturbed else None,
            "inputs_digest": self.inputs_digest,
            "notes": self.notes,
            "extras": self.extras,
        }


def _digest(theorem: Theorem, **inputs) -> str:
    payload = json.dumps({"theorem": theorem.value, **inputs}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


def _issue(theorem: Theorem, margin: float, threshold: float, rho: Optional[float],
           bounds: Optional[FrameBounds], notes: dict, extras: Optional[dict] = None,
           **inputs) -> StabilityCertificate:
    """Build the certificate; rho is the relative perturbation used when it passes."""
    passed = margin < threshold
    perturbed = None
    if passed:
        perturbed = FrameBounds((1 - rho) * bounds.A, (1 + rho) * bounds.B,
                                BoundsProvenance.CERTIFIED_PERTURBED)
    certificate = StabilityCertificate(theorem, float(margin), float(threshold), passed,
                                       perturbed, notes, extras or {},
                                       _digest(theorem, notes=notes, **inputs))
    logger.info(json.dumps({"event": "certificate_computed", "theorem": theorem.value,
                            "margin": certificate.margin, "threshold": certificate.threshold,
                            "passed": passed}))
    return certificate


def _bounds_inputs(bounds: FrameBounds) -> dict:
    return {"A": bounds.A, "B": bounds.B, "provenance": bounds.provenance.value}


# -- Paley-Wiener and Kadec -------------------------------------------------------

def paley_wiener_certificate(A: float, B: float, lam: float, mu: float) -> StabilityCertificate:
    """Passes iff λ + μ/√A < 1; then A' = (1 - (λ + μ/√A))A and B' = (1 + λ + μ/√A)B."""
    if lam < 0 or mu < 0:
        raise PreconditionError('Paley-Wiener constants lambda and mu must be nonnegative')
    bounds = FrameBounds(A, B, BoundsProvenance.EXPLICIT)
    margin = lam + mu / math.sqrt(A)
    return _issue(Theorem.PALEY_WIENER, margin, 1.0, margin, bounds,
                  {"lambda": lam, "mu": mu, "bounds": _bounds_inputs(bounds)})


def kadec_factor(delta: float, M: int) -> float:
    """1 - cos(πδM) + sin(πδM)."""
    x = math.pi * delta * M
    return 1.0 - math.cos(x) + math.sin(x)


def kadec_guarantee_holds(delta: float, M: int) -> bool:
    return 0 <= delta < 1.0 / (4 * M)


def kadec_constant(delta: float, M: int) -> float:
    """
    √(M/2π)·(1 - cos(πδM) + sin(πδM)).

    Values with δ >= 1/(4M) are returned but logged, since the bound is only
    guaranteed below that.
    """
    if delta < 0:
        raise PreconditionError('Kadec perturbation size must be nonnegative')
    if int(M) != M or M < 1:
        raise PreconditionError('Kadec bandwidth M must be a positive integer')
    if not kadec_guarantee_holds(delta, M):
        logger.warning(json.dumps({"event": "kadec_out_of_range", "delta": delta, "M": M,
                                   "limit": 1.0 / (4 * M)}))
    return math.sqrt(M / (2 * math.pi)) * kadec_factor(delta, M)


# -- compact support ----------------------------------------------------------------

def _require_summable_columns(pattern: JitterPattern) -> None:
    if pattern.unbounded_n:
        raise PreconditionError(
            'non-summable column: column-constant jitter makes Σ_n infinite'
        )


def _sup_column_sum(w: Window, pattern: JitterPattern, shift_scale: float) -> float:
    """sup_k Σ_n m(shift_scale·δ_{n,k})² over the stored entries."""
    if not pattern.deltas:
        return 0.0
    keys = list(pattern.deltas)
    columns = np.array([k for (_, k) in keys])
    shifts = shift_scale * np.array([pattern.deltas[key] for key in keys])
    squares = np.asarray(shift_diff_norm(w, shifts)) ** 2
    unique, inverse = np.unique(columns, return_inverse=True)
    sums = np.zeros(unique.size)
    np.add.at(sums, inverse, squares)
    return float(np.max(sums))


def _check_compact_inputs(w: Window, a: float, pattern: JitterPattern) -> float:
    if not w.is_compact:
        raise PreconditionError('compact-support certificate needs a compactly supported window')
    c = w.support_length
    if a <= 0 or a > c * (1 + 1e-12):
        raise PreconditionError(f'compact-support certificate needs 0 < a <= c, got a={a:g}, c={c:g}')
    if pattern.max_abs >= 0.5:
        raise PreconditionError('jitter entries must lie in (-1/2, 1/2)')
    _require_summable_columns(pattern)
    return c


def certify_compact_support(w: Window, a: float, b: float, bounds: FrameBounds,
                            pattern: JitterPattern) -> StabilityCertificate:
    """λ = 4·sup_k Σ_n ‖h - h(· - aδ_{n,k})‖₂², passing iff λ < A."""
    _check_compact_inputs(w, a, pattern)
    lam = 4.0 * _sup_column_sum(w, pattern, a)
    return _issue(Theorem.THM1_COMPACT, lam, bounds.A, math.sqrt(lam / bounds.A), bounds,
                  {"window": w.label, "a": a, "b": b, "bounds": _bounds_inputs(bounds),
                   "jitter_digest": pattern.digest()})


def certify_bspline(w: Window, p: int, a: float, b: float, bounds_p: FrameBounds,
                    pattern: JitterPattern, grid: Optional[GridSpec] = None) -> StabilityCertificate:
    """
    Certificate for G(h^(p); pa, b/p) from the base window h.

    λ = 4·‖h‖₁^{2(p-1)}·sup_k Σ_n ‖h - h(· - apδ_{n,k})‖₂², passing iff λ < A_p.
    """
    p = int(p)
    if p < 1:
        raise PreconditionError('convolution power p must be >= 1')
    _check_compact_inputs(w, a, pattern)
    l1 = window_functionals(w, grid or _default_grid(w)).l1
    factor = l1 ** (2 * (p - 1))
    lam = 4.0 * factor * _sup_column_sum(w, pattern, a * p)
    return _issue(Theorem.COR_BSPLINE, lam, bounds_p.A, math.sqrt(lam / bounds_p.A), bounds_p,
                  {"window": w.label, "p": p, "a": a, "b": b, "bounds": _bounds_inputs(bounds_p),
                   "jitter_digest": pattern.digest()},
                  {"l1_factor": factor})


def compare_with_prior_rect_condition(a: float, b: float, A: float,
                                      pattern: JitterPattern) -> dict:
    """
    For rect: the column-wise quantity 4aA⁻¹·sup_k Σ_n|δ_{n,k}| against the
    earlier row-wise sufficient condition 4ab·Σ_n sup_k|δ_{n,k}|.
    """
    marginals = jitter_marginals(pattern)
    column_sup = max(marginals.col_abs_sums.values(), default=0.0)
    if marginals.unbounded_n:
        row_sum = math.inf
    else:
        row_sum = math.fsum(marginals.D.values())
    current = 4.0 * a / A * column_sup
    prior = 4.0 * a * b * row_sum
    return {"current": current, "prior": prior, "improves": current <= prior}


# -- Wiener amalgam ---------------------------------------------------------------------

def certify_wiener_amalgam(w: Window, a: float, b: float, bounds: FrameBounds,
                           pattern: JitterPattern) -> StabilityCertificate:
    """λ = (ab)^{-1/2}·‖h'‖_W·(Σ_k d_k²)^{1/2}, passing iff λ < √A."""
    norm = wiener_amalgam_norm(Window.derivative(w))
    if not math.isfinite(norm):
        raise PreconditionError('derivative has infinite amalgam norm')
    marginals = jitter_marginals(pattern)
    d_norm = math.sqrt(math.fsum(v * v for v in marginals.d.values()))
    lam = norm * d_norm / math.sqrt(a * b)
    root = math.sqrt(bounds.A)
    return _issue(Theorem.THM_WIENER_AMALGAM, lam, root, lam / root, bounds,
                  {"window": w.label, "a": a, "b": b, "bounds": _bounds_inputs(bounds),
                   "jitter_digest": pattern.digest()},
                  {"derivative_amalgam_norm": norm, "column_sup_l2": d_norm})


# -- band-limited --------------------------------------------------------------------------

def _default_grid(w: Window) -> GridSpec:
    lo, hi = w.support
    width = hi - lo
    step = width / 256
    if w.kind is WindowKind.SAMPLED:
        step = min(step, w.dx)
    return GridSpec.with_step(lo - width, hi + width, step)


def certify_bandlimited(w: Window, a: float, b: float, bounds: FrameBounds,
                        pattern: JitterPattern, grid: Optional[GridSpec] = None) -> StabilityCertificate:
    """
    μ = ‖ĥ‖∞·√(M/2π)·(Σ_n (1 - cos(2πMD_n) + sin(2πMD_n))²)^{1/2}, passing iff μ < √A.

    The extras report the same sum with the argument πMD_n and the simplified
    sufficient margin (M/√π)·‖ĥ‖∞·(Σ_n D_n²)^{1/2}.
    """
    M = w.bandwidth
    if M is None:
        raise PreconditionError('missing band_limit metadata')
    if pattern.max_abs >= 1.0 / (4 * M):
        raise PreconditionError(
            f'jitter {pattern.max_abs:g} is not below 1/(4M) = {1.0 / (4 * M):g}'
        )
    _require_summable_columns(pattern)
    if w.is_compact:
        sup_ft = window_functionals(w, grid or _default_grid(w)).sup_ft
    else:
        sup_ft = window_functionals(w, grid).sup_ft
    rows = list(jitter_marginals(pattern).D.values())
    scale = sup_ft * math.sqrt(M / (2 * math.pi))
    theorem_sum = math.fsum(kadec_factor(2 * D, M) ** 2 for D in rows)
    lemma_sum = math.fsum(kadec_factor(D, M) ** 2 for D in rows)
    mu = scale * math.sqrt(theorem_sum)
    extras = {
        "lemma_form_margin": scale * math.sqrt(lemma_sum),
        "simplified_margin": M / math.sqrt(math.pi) * sup_ft * math.sqrt(math.fsum(D * D for D in rows)),
        "sup_ft": sup_ft,
        "M": M,
    }
    root = math.sqrt(bounds.A)
    return _issue(Theorem.THM_BANDLIMITED, mu, root, mu / root, bounds,
                  {"window": w.label, "a": a, "b": b, "bounds": _bounds_inputs(bounds),
                   "jitter_digest": pattern.digest()},
                  extras)


# -- painless overlap ----------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapCheck:
    holds: bool
    witness: Optional[int]
    max_step: float
    threshold: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": self.witness,
                "max_step": self.max_step, "threshold": self.threshold}


def nsgf_overlap_check(c: float, a: float, column_deltas: Mapping[int, float]) -> OverlapCheck:
    """δ_{k+1} - δ_k <= (c - a)/a for every consecutive pair; the witness is the first k that fails."""
    if not 0 < a <= c * (1 + 1e-12):
        raise PreconditionError(f'overlap check needs 0 < a <= c, got a={a:g}, c={c:g}')
    keys = sorted(int(k) for k in column_deltas)
    if keys and keys != list(range(keys[0], keys[-1] + 1)):
        raise PreconditionError('column_deltas must cover a contiguous range of k')
    threshold = (c - a) / a
    witness = None
    max_step = -math.inf
    for k in keys[:-1]:
        step = float(column_deltas[k + 1]) - float(column_deltas[k])
        max_step = max(max_step, step)
        if witness is None and step > threshold:
            witness = k
    if len(keys) < 2:
        max_step = 0.0
    return OverlapCheck(witness is None, witness, max_step, threshold)


def certify_nsgf_overlap(w: Window, a: float, b: float,
                         column_deltas: Mapping[int, float]) -> StabilityCertificate:
    """
    Painless system with column jitter δ_k. Passes when every step
    δ_{k+1} - δ_k is at most (c - a)/a and the diagonal frame operator stays
    bounded below; the perturbed bounds are that operator's ess-inf and ess-sup.

    Columns outside the listed range are unjittered, so the steps into and
    out of the listed range are checked too.
    """
    if not w.is_compact:
        raise PreconditionError('overlap certificate needs a compactly supported window')
    padded = {int(k): float(v) for k, v in column_deltas.items()}
    if padded:
        padded.setdefault(min(padded) - 1, 0.0)
        padded.setdefault(max(padded) + 1, 0.0)
    check = nsgf_overlap_check(w.support_length, a, padded)
    notes = {"window": w.label, "a": a, "b": b,
             "column_deltas": {str(k): float(v) for k, v in sorted(column_deltas.items())}}
    multiplier = None
    covering = None
    if check.holds:
        try:
            multiplier = nsgf_multiplier_bounds(w, a, b, column_deltas)
        except PreconditionError as exc:
            if 'covering fails' not in str(exc):
                raise
        covering = multiplier is not None
    passed = multiplier is not None
    perturbed = None
    if passed:
        perturbed = FrameBounds(multiplier.A, multiplier.B, BoundsProvenance.CERTIFIED_PERTURBED, True)
    certificate = StabilityCertificate(
        Theorem.COR_NSGF_OVERLAP, check.max_step, check.threshold, passed, perturbed, notes,
        {"overlap": check.to_dict(), "covering": covering}, _digest(Theorem.COR_NSGF_OVERLAP, notes=notes),
    )
    logger.info(json.dumps({"event": "certificate_computed", "theorem": certificate.theorem.value,
                            "margin": certificate.margin, "threshold": certificate.threshold,
                            "passed": passed}))
    return certificate
