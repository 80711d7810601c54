"""
The Gabor system model: lattices, timing-jitter patterns and atoms.

An atom of the jittered system is

    g_{n,k}(x) = e^{2πibnx} h(x - a(k + δ_{n,k}))

with n the frequency index and k the time index.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .exceptions import PreconditionError
from .grids import GridSpec, SampledFunction
from .windows import Window, eval_window


logger = logging.getLogger('frames')

DENSITY_SLACK = 1e-12
GEOMETRIC_CUTOFF = 1e-15

_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class GaborLattice:
    a: float
    b: float
    n_range: Tuple[int, int]
    k_range: Tuple[int, int]

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise PreconditionError('lattice steps a and b must be positive')
        if self.a * self.b > 1 + DENSITY_SLACK:
            raise PreconditionError(
                f'necessary density condition violated: ab = {self.a * self.b:g} > 1'
            )
        for name in ('n_range', 'k_range'):
            lo, hi = getattr(self, name)
            if int(lo) != lo or int(hi) != hi:
                raise PreconditionError(f'{name} bounds must be integers')
            if lo > hi:
                raise PreconditionError(f'{name} must be nonempty')

    @property
    def n_indices(self) -> np.ndarray:
        return np.arange(self.n_range[0], self.n_range[1] + 1)

    @property
    def k_indices(self) -> np.ndarray:
        return np.arange(self.k_range[0], self.k_range[1] + 1)

    @property
    def density(self) -> float:
        return self.a * self.b

    def contains(self, n: int, k: int) -> bool:
        return (self.n_range[0] <= n <= self.n_range[1]
                and self.k_range[0] <= k <= self.k_range[1])

    def with_ranges(self, n_range=None, k_range=None) -> 'GaborLattice':
        return GaborLattice(self.a, self.b,
                            tuple(n_range) if n_range is not None else self.n_range,
                            tuple(k_range) if k_range is not None else self.k_range)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b,
                "n_range": list(self.n_range), "k_range": list(self.k_range)}


def make_lattice(a: float, b: float, n_range, k_range) -> GaborLattice:
    """Validated lattice; rejects ab > 1."""
    lattice = GaborLattice(float(a), float(b),
                           (int(n_range[0]), int(n_range[1])),
                           (int(k_range[0]), int(k_range[1])))
    return lattice


class JitterShape(str, Enum):
    NONE = 'none'
    EXPLICIT = 'explicit'
    UNIFORM_RANDOM = 'uniform-random'
    GEOMETRIC_IN_N = 'geometric-in-n'
    COLUMN_CONSTANT = 'column-constant'
    SEPARABLE = 'separable'


@dataclass(frozen=True, eq=False)
class JitterPattern:
    """
    δ_{n,k} over a finite index window; 0 outside the stored entries.

    columns holds column-constant entries k -> δ that apply to every n, which
    makes per-column sums over n infinite (unbounded_n).
    """
    deltas: Mapping[Tuple[int, int], float]
    bound: float
    shape: JitterShape = JitterShape.EXPLICIT
    columns: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'deltas', MappingProxyType(
            {(int(n), int(k)): float(v) for (n, k), v in self.deltas.items()}))
        object.__setattr__(self, 'columns', MappingProxyType(
            {int(k): float(v) for k, v in self.columns.items()}))
        if not (self.bound >= 0 and math.isfinite(self.bound)):
            raise PreconditionError('jitter bound must be finite and nonnegative')
        values = list(self.deltas.values()) + list(self.columns.values())
        for value in values:
            if not math.isfinite(value):
                raise PreconditionError('jitter entries must be finite')
            if abs(value) > self.bound * (1 + 1e-12) + 1e-15:
                raise PreconditionError(
                    f'jitter entry {value:g} exceeds the declared bound {self.bound:g}'
                )

    @classmethod
    def zero(cls) -> 'JitterPattern':
        return cls({}, 0.0, JitterShape.NONE)

    @property
    def unbounded_n(self) -> bool:
        return any(v != 0.0 for v in self.columns.values())

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.deltas.values()) and not self.unbounded_n

    @property
    def max_abs(self) -> float:
        values = [abs(v) for v in self.deltas.values()] + [abs(v) for v in self.columns.values()]
        return max(values, default=0.0)

    def delta(self, n: int, k: int) -> float:
        value = self.deltas.get((n, k))
        if value is not None:
            return value
        return self.columns.get(k, 0.0)

    def column(self, k: int) -> Dict[int, float]:
        """Stored entries n -> δ_{n,k} of column k."""
        return {n: v for (n, kk), v in self.deltas.items() if kk == k}

    def stored_columns(self) -> Iterable[int]:
        return sorted({k for (_, k) in self.deltas} | set(self.columns))

    def scaled(self, factor: float) -> 'JitterPattern':
        factor = float(factor)
        return JitterPattern({key: v * factor for key, v in self.deltas.items()},
                             self.bound * abs(factor), self.shape,
                             {k: v * factor for k, v in self.columns.items()})

    def digest(self) -> str:
        payload = {
            "deltas": sorted([n, k, v] for (n, k), v in self.deltas.items()),
            "columns": sorted([k, v] for k, v in self.columns.items()),
            "bound": self.bound,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.value,
            "bound": self.bound,
            "entries": len(self.deltas),
            "column_constant": {str(k): v for k, v in sorted(self.columns.items())},
            "unbounded_n": self.unbounded_n,
            "digest": self.digest(),
        }


@dataclass(frozen=True)
class JitterMarginals:
    """d_k = sup_n|δ_{n,k}|, D_n = sup_k|δ_{n,k}| and per-column sums over n."""
    d: Dict[int, float]
    D: Dict[int, float]
    col_abs_sums: Dict[int, float]
    col_sq_sums: Dict[int, float]
    unbounded_n: bool = False

    def d_at(self, k: int) -> float:
        return self.d.get(k, 0.0)


def jitter_marginals(pattern: JitterPattern) -> JitterMarginals:
    d: Dict[int, float] = {}
    D: Dict[int, float] = {}
    abs_sums: Dict[int, float] = {}
    sq_sums: Dict[int, float] = {}
    for (n, k), value in pattern.deltas.items():
        mag = abs(value)
        d[k] = max(d.get(k, 0.0), mag)
        D[n] = max(D.get(n, 0.0), mag)
        abs_sums[k] = abs_sums.get(k, 0.0) + mag
        sq_sums[k] = sq_sums.get(k, 0.0) + mag * mag
    for k, value in pattern.columns.items():
        mag = abs(value)
        d[k] = max(d.get(k, 0.0), mag)
        if mag > 0:
            abs_sums[k] = math.inf
            sq_sums[k] = math.inf
    return JitterMarginals(d, D, abs_sums, sq_sums, pattern.unbounded_n)


# -- generation ----------------------------------------------------------------

def splitmix64(seed: int, count: int) -> np.ndarray:
    """
    The first `count` outputs of SplitMix64 started at `seed`.

    state_i = seed + i·0x9E3779B97F4A7C15 (i = 1, 2, ...), then
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB;
    z ^= z >> 31, all modulo 2^64.
    """
    state = np.uint64(int(seed) % (1 << 64))
    z = np.arange(1, count + 1, dtype=np.uint64) * _GOLDEN_GAMMA + state
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def uniform_unit(seed: int, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of SplitMix64."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def _check_compact_bound(bound: float, target_compact: bool) -> None:
    if target_compact and bound >= 0.5:
        raise PreconditionError(
            f'jitter bound {bound:g} >= 1/2 is outside the compact-support regime'
        )


def _range(value, name: str) -> Tuple[int, int]:
    if value is None:
        raise PreconditionError(f'{name} is required for this jitter shape')
    lo, hi = int(value[0]), int(value[1])
    if lo > hi:
        raise PreconditionError(f'{name} must be nonempty')
    return lo, hi


def generate_jitter(shape, target_compact: bool = True, **params) -> JitterPattern:
    """
    Build a reproducible jitter pattern.

    Shapes and their parameters:
        none
        uniform-random   bound, seed, n_range, k_range
        geometric-in-n   peak, ratio, columns=[0], n_max=None
        column-constant  value with k_range, or values {k: d}
        separable        row_amplitudes {n: D_n}, column_weights {k: e_k}

    uniform-random enumerates (k, n) with k outer and n inner, both ascending,
    and draws δ = bound·(2u - 1) from successive SplitMix64 outputs.
    """
    shape = JitterShape(shape)
    if shape is JitterShape.NONE:
        pattern = JitterPattern.zero()
    elif shape is JitterShape.UNIFORM_RANDOM:
        bound = float(params['bound'])
        _check_compact_bound(bound, target_compact)
        n_lo, n_hi = _range(params.get('n_range'), 'n_range')
        k_lo, k_hi = _range(params.get('k_range'), 'k_range')
        keys = [(n, k) for k in range(k_lo, k_hi + 1) for n in range(n_lo, n_hi + 1)]
        draws = bound * (2.0 * uniform_unit(int(params.get('seed', 0)), len(keys)) - 1.0)
        pattern = JitterPattern(dict(zip(keys, draws.tolist())), bound, shape)
    elif shape is JitterShape.GEOMETRIC_IN_N:
        peak = float(params['peak'])
        ratio = float(params['ratio'])
        if not 0 < ratio < 1:
            raise PreconditionError('geometric ratio must lie in (0, 1)')
        _check_compact_bound(abs(peak), target_compact)
        n_max = params.get('n_max')
        if n_max is None:
            n_max = int(math.ceil(math.log(GEOMETRIC_CUTOFF) / math.log(ratio)))
        columns = params.get('columns', [0])
        deltas = {(n, int(k)): peak * ratio ** abs(n)
                  for k in columns for n in range(-int(n_max), int(n_max) + 1)}
        pattern = JitterPattern(deltas, abs(peak), shape)
    elif shape is JitterShape.COLUMN_CONSTANT:
        if 'values' in params:
            columns = {int(k): float(v) for k, v in params['values'].items()}
        else:
            k_lo, k_hi = _range(params.get('k_range'), 'k_range')
            columns = {k: float(params['value']) for k in range(k_lo, k_hi + 1)}
        bound = max((abs(v) for v in columns.values()), default=0.0)
        _check_compact_bound(bound, target_compact)
        pattern = JitterPattern({}, bound, shape, columns)
    else:
        rows = {int(n): float(v) for n, v in params['row_amplitudes'].items()}
        weights = {int(k): float(v) for k, v in params['column_weights'].items()}
        if any(abs(v) > 1 for v in weights.values()):
            raise PreconditionError('separable column weights must satisfy |e_k| <= 1')
        bound = max((abs(v) for v in rows.values()), default=0.0) * \
            max((abs(v) for v in weights.values()), default=0.0)
        _check_compact_bound(bound, target_compact)
        deltas = {(n, k): dn * ek for n, dn in rows.items() for k, ek in weights.items()}
        pattern = JitterPattern(deltas, bound, shape)
    logger.info(json.dumps({"event": "jitter_generated", "shape": shape.value,
                            "entries": len(pattern.deltas), "digest": pattern.digest()}))
    return pattern


# -- atoms ---------------------------------------------------------------------

def atom(w: Window, lattice: GaborLattice, n: int, k: int, delta: float,
         grid: GridSpec) -> SampledFunction:
    """Samples of x -> e^{2πibnx} h(x - a(k + δ)) on the grid."""
    if not lattice.contains(n, k):
        raise PreconditionError(f'atom index (n={n}, k={k}) is outside the lattice ranges')
    x = grid.points
    shift = lattice.a * (k + delta)
    values = np.exp(2j * np.pi * lattice.b * n * x) * eval_window(w, x - shift)
    return SampledFunction(x, values)


# -- file interface --------------------------------------------------------------

def load_jitter_csv(path, bound: Optional[float] = None) -> JitterPattern:
    """Read a CSV with header `n,k,delta`."""
    path = Path(path)
    if not path.exists():
        raise PreconditionError(f"jitter file '{path}' not found")
    deltas = {}
    with path.open(newline='') as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ['n', 'k', 'delta']:
            raise PreconditionError("jitter file must start with header 'n,k,delta'")
        for row in reader:
            try:
                key = (int(row['n']), int(row['k']))
                deltas[key] = float(row['delta'])
            except (TypeError, ValueError) as exc:
                raise PreconditionError(f'malformed jitter row {row}: {exc}') from exc
    if bound is None:
        bound = max((abs(v) for v in deltas.values()), default=0.0)
    pattern = JitterPattern(deltas, float(bound), JitterShape.EXPLICIT)
    logger.info(json.dumps({"event": "jitter_loaded", "path": str(path),
                            "entries": len(deltas), "digest": pattern.digest()}))
    return pattern


def write_jitter_csv(pattern: JitterPattern, path) -> None:
    if pattern.unbounded_n:
        raise PreconditionError('column-constant patterns have no finite CSV form')
    with Path(path).open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['n', 'k', 'delta'])
        for (n, k), value in sorted(pattern.deltas.items(), key=lambda item: (item[0][1], item[0][0])):
            writer.writerow([n, k, repr(value)])
