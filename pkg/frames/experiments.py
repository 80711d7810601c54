"""
Experiment runner: builds the objects an experiment file describes and runs
its tasks in order, one TaskResult per task.
"""

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.conf import settings
from django.utils.text import slugify

from .bounds import (
    BoundsProvenance, FOURIER_TRUNCATION, FrameBounds, bspline_bound_recursion, compute_N_h,
    fourier_side_bounds, painless_bounds, rect_bounds,
)
from .exceptions import ConfigError, ConvergenceError, FramesError, PreconditionError
from .forms import validate_experiment, validate_task
from .gabor import GaborLattice, JitterPattern, generate_jitter, load_jitter_csv, make_lattice
from .grids import GridSpec
from .models import ExperimentConfig, Report, TaskResult, TaskStatus
from .numerics import TestSubspace, discretize, empirical_frame_bounds
from .signals import certificate_issued, task_completed
from .stability import (
    StabilityCertificate, Theorem, certify_bandlimited, certify_bspline, certify_compact_support,
    certify_nsgf_overlap, certify_wiener_amalgam, compare_with_prior_rect_condition,
    paley_wiener_certificate,
)
from .windows import Window, WindowKind, iterate_convolution, load_sampled_window


logger = logging.getLogger('frames')

TASK_ERRORS = (FramesError, ValueError, ArithmeticError)
JITTER_PARAMS = ('bound', 'seed', 'n_range', 'k_range', 'peak', 'ratio', 'n_max', 'columns',
                 'value', 'values', 'row_amplitudes', 'column_weights')

System = Tuple[Window, GaborLattice, JitterPattern]


# -- loading and building ------------------------------------------------------------

def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError('experiment config is invalid', [f"config: file '{path}' not found"])
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError('experiment config is invalid', [f'config: invalid JSON ({exc})'])
    return validate_experiment(data, base_dir=path.parent)


def build_window(config: ExperimentConfig) -> Window:
    spec = config.window
    kind = spec['kind']
    if kind == 'rect':
        window = Window.rect()
    elif kind == 'bspline':
        window = Window.bspline(spec['p'])
    elif kind == 'sinc':
        window = Window.sinc(spec['M'])
    else:
        window = load_sampled_window(config.resolve(spec['path']), band_limit=spec.get('band_limit'))
    if spec.get('derivative'):
        window = Window.derivative(window)
    return window


def build_lattice(config: ExperimentConfig) -> GaborLattice:
    spec = config.lattice
    return make_lattice(spec['a'], spec['b'], spec['n_range'], spec['k_range'])


def build_jitter(config: ExperimentConfig, window: Window, seed: int) -> JitterPattern:
    spec = config.jitter
    if spec.get('path'):
        return load_jitter_csv(config.resolve(spec['path']), bound=spec.get('bound'))
    params = {name: spec[name] for name in JITTER_PARAMS if name in spec}
    params.setdefault('seed', seed)
    return generate_jitter(spec['shape'], target_compact=window.is_compact, **params)


def build_grid(config: ExperimentConfig, grid_points: Optional[int] = None) -> GridSpec:
    spec = config.grid
    return GridSpec(float(spec['x_min']), float(spec['x_max']),
                    int(grid_points or spec['n_points']))


def build_subspace(config: ExperimentConfig) -> TestSubspace:
    spec = config.oracle
    return TestSubspace(float(spec['subspace_center']), float(spec['subspace_width']),
                        int(spec['modes']), spec.get('taper', 'box'))


def effective_seed(config: ExperimentConfig, seed: Optional[int] = None) -> int:
    if seed is not None:
        return int(seed)
    if config.seed is not None:
        return int(config.seed)
    return int(settings.FRAMES_SEED)


@dataclass
class ExperimentContext:
    """Objects shared by the tasks of one run."""
    config: ExperimentConfig
    seed: int
    window: Window
    lattice: GaborLattice
    pattern: JitterPattern
    grid: GridSpec
    subspace: TestSubspace
    tolerance: float
    certificate: Optional[StabilityCertificate] = None
    certified: Optional[System] = None
    _bounds: Dict[tuple, FrameBounds] = field(default_factory=dict)

    def bounds_for(self, window: Window, lattice: GaborLattice) -> FrameBounds:
        key = (window.label, lattice.a, lattice.b)
        if key not in self._bounds:
            self._bounds[key] = _compute_bounds(self.config.bounds, window, lattice)
        return self._bounds[key]


def _compute_bounds(spec: dict, window: Window, lattice: GaborLattice) -> FrameBounds:
    method = spec['method']
    a, b = lattice.a, lattice.b
    if method == 'painless':
        return painless_bounds(window, a, b)
    if method == 'fourier-side':
        return fourier_side_bounds(window, a, b, spec.get('trunc', FOURIER_TRUNCATION))
    if method == 'rect-special':
        if window.kind is not WindowKind.RECT:
            raise PreconditionError(f'rect-special bounds need the rect window, got {window.label}')
        return rect_bounds(a, b)
    return FrameBounds(spec['A'], spec['B'], BoundsProvenance.EXPLICIT)


def prepare(config: ExperimentConfig, seed: int, grid_points: Optional[int] = None) -> ExperimentContext:
    """Build the shared objects; failures here are configuration errors."""
    diagnostics = []

    def attempt(section, builder, *args):
        try:
            return builder(*args)
        except TASK_ERRORS as exc:
            diagnostics.append(f'{section}: {exc}')
            return None

    window = attempt('window', build_window, config)
    lattice = attempt('lattice', build_lattice, config)
    pattern = attempt('jitter', build_jitter, config, window, seed) if window else None
    grid = attempt('grid', build_grid, config, grid_points)
    subspace = attempt('oracle', build_subspace, config)
    if diagnostics:
        raise ConfigError('experiment cannot be prepared', diagnostics)
    tolerance = config.oracle.get('tolerance', settings.FRAMES_ORACLE_TOLERANCE)
    return ExperimentContext(config, seed, window, lattice, pattern, grid, subspace, float(tolerance))


# -- certificates --------------------------------------------------------------------

def _column_deltas(task: dict, pattern: JitterPattern) -> Dict[int, float]:
    raw = task.get('column_deltas')
    if raw is not None:
        return {int(k): float(v) for k, v in raw.items()}
    if pattern.columns:
        return dict(pattern.columns)
    raise PreconditionError('cor-nsgf-overlap needs column_deltas or column-constant jitter')


def _convolved(window: Window, p: int) -> Window:
    if p == 1:
        return window
    if window.kind is WindowKind.RECT:
        return Window.bspline(p)
    return iterate_convolution(window, p)


def issue_certificate(ctx: ExperimentContext, theorem: Theorem, task: dict, window: Window,
                      lattice: GaborLattice, pattern: JitterPattern):
    """
    Run one certificate. Returns the certificate, extra report fields and the
    system the certificate speaks about (the one `verify` should sample).
    """
    a, b = lattice.a, lattice.b
    details = {}
    system = (window, lattice, pattern)
    bounds = ctx.bounds_for(window, lattice)
    if theorem is Theorem.PALEY_WIENER:
        certificate = paley_wiener_certificate(bounds.A, bounds.B, task['lambda'], task['mu'])
    elif theorem is Theorem.THM1_COMPACT:
        certificate = certify_compact_support(window, a, b, bounds, pattern)
        if window.kind is WindowKind.RECT:
            details['prior_condition'] = compare_with_prior_rect_condition(a, b, bounds.A, pattern)
    elif theorem is Theorem.COR_BSPLINE:
        p = int(task['p'])
        nh = compute_N_h(window, b)
        c = window.support_length if window.is_compact else None
        bounds_p = bspline_bound_recursion(bounds.A, bounds.B, a, nh, p, c=c, b=b)
        certificate = certify_bspline(window, p, a, b, bounds_p, pattern)
        details['N_h'] = nh.to_dict()
        details['bounds_p'] = bounds_p.to_dict()
        system = (_convolved(window, p), make_lattice(p * a, b / p, lattice.n_range, lattice.k_range),
                  pattern)
    elif theorem is Theorem.THM_WIENER_AMALGAM:
        certificate = certify_wiener_amalgam(window, a, b, bounds, pattern)
    elif theorem is Theorem.THM_BANDLIMITED:
        certificate = certify_bandlimited(window, a, b, bounds, pattern, ctx.grid)
    else:
        deltas = _column_deltas(task, pattern)
        certificate = certify_nsgf_overlap(window, a, b, deltas)
        system = (window, lattice, generate_jitter('column-constant', target_compact=False,
                                                   values=deltas))
    details['bounds'] = bounds.to_dict()
    return certificate, details, system


# -- tasks ------------------------------------------------------------------------------

def _run_bounds(ctx: ExperimentContext, task: dict):
    bounds = ctx.bounds_for(ctx.window, ctx.lattice)
    return TaskStatus.OK, {"bounds": bounds.to_dict()}


def _run_certify(ctx: ExperimentContext, task: dict):
    ctx.certificate = None
    ctx.certified = None
    theorem = Theorem(task['type'].split(':', 1)[1])
    certificate, details, system = issue_certificate(ctx, theorem, task, ctx.window, ctx.lattice,
                                                     ctx.pattern)
    ctx.certificate = certificate
    ctx.certified = system
    certificate_issued.send(sender=run_experiment, config=ctx.config, task=task,
                            certificate=certificate)
    expect = task.get('expect')
    status = TaskStatus.OK
    if expect and (expect == 'pass') != certificate.passed:
        status = TaskStatus.FAILED
    return status, {"certificate": certificate.to_dict(), "expect": expect, **details}


def _run_verify(ctx: ExperimentContext, task: dict):
    window, lattice, pattern = ctx.certified or (ctx.window, ctx.lattice, ctx.pattern)
    oracle = ctx.config.oracle
    system = discretize(window, lattice, pattern, ctx.grid, domain=oracle['domain'],
                        half_width=oracle.get('half_width'))
    empirical = empirical_frame_bounds(system, ctx.subspace, seed=ctx.seed)
    result = {"empirical": empirical.to_dict(), "system": {"window": window.label,
                                                           "lattice": lattice.to_dict(),
                                                           "jitter_digest": pattern.digest()}}
    certificate = ctx.certificate
    if certificate is None:
        return TaskStatus.OK, result
    result["certificate"] = {"theorem": certificate.theorem.value, "passed": certificate.passed}
    if not certificate.passed:
        result["containment"] = None
        return TaskStatus.OK, result
    lower = certificate.perturbed.A - ctx.tolerance
    upper = certificate.perturbed.B + ctx.tolerance
    contained = lower <= empirical.lambda_min and empirical.lambda_max <= upper
    result["containment"] = {"lower": lower, "upper": upper, "tolerance": ctx.tolerance,
                             "contained": contained}
    if not contained:
        logger.warning(json.dumps({"event": "certificate_counterexample",
                                   "theorem": certificate.theorem.value,
                                   "lambda_min": empirical.lambda_min,
                                   "lambda_max": empirical.lambda_max,
                                   "lower": lower, "upper": upper}))
    return (TaskStatus.OK if contained else TaskStatus.FAILED), result


def _with_amplitude(pattern: JitterPattern, amplitude: float) -> JitterPattern:
    reference = pattern.bound or pattern.max_abs
    if reference == 0:
        raise PreconditionError('jitter-amplitude sweeps need a nonzero base pattern')
    return pattern.scaled(amplitude / reference)


SWEEP_COLUMNS = {
    'bounds': ['value', 'A', 'B', 'error'],
    'certificate': ['value', 'margin', 'threshold', 'passed', 'A_prime', 'B_prime', 'error'],
}


def sweep_row(ctx: ExperimentContext, param: str, value: float, theorem: str, task: dict) -> dict:
    """One sweep row; errors are recorded in the row."""
    row = {"value": value}
    window, lattice, pattern = ctx.window, ctx.lattice, ctx.pattern
    params = dict(task)
    try:
        if param == 'jitter-amplitude':
            pattern = _with_amplitude(pattern, value)
        elif param == 'a':
            lattice = make_lattice(value, lattice.b, lattice.n_range, lattice.k_range)
        elif param == 'b':
            lattice = make_lattice(lattice.a, value, lattice.n_range, lattice.k_range)
        else:
            params['p'] = int(value)
        if theorem == 'bounds':
            bounds = ctx.bounds_for(window, lattice)
            row.update(A=bounds.A, B=bounds.B)
        else:
            certificate, _, _ = issue_certificate(ctx, Theorem(theorem), params, window, lattice, pattern)
            data = certificate.to_dict()
            row.update({key: data[key] for key in ('margin', 'threshold', 'passed', 'A_prime', 'B_prime')})
    except TASK_ERRORS as exc:
        row["error"] = error_payload(exc)
    return row


def _run_sweep(ctx: ExperimentContext, task: dict):
    param = task['type'].split(':', 1)[1]
    theorem = task.get('theorem', Theorem.THM1_COMPACT.value)
    rows = [sweep_row(ctx, param, value, theorem, task) for value in task['values']]
    columns = SWEEP_COLUMNS['bounds' if theorem == 'bounds' else 'certificate']
    errors = sum(1 for row in rows if 'error' in row)
    if errors:
        logger.warning(json.dumps({"event": "sweep_rows_failed", "param": param, "failed": errors,
                                   "rows": len(rows)}))
    status = TaskStatus.FAILED if errors else TaskStatus.OK
    return status, {"param": param, "theorem": theorem, "columns": columns, "rows": rows}


def error_payload(exc: Exception) -> dict:
    if isinstance(exc, ConvergenceError):
        return {"type": type(exc).__name__, **exc.to_dict()}
    return {"type": type(exc).__name__, "message": str(exc)}


def run_task(ctx: ExperimentContext, index: int, task: dict) -> TaskResult:
    kind = task['type']
    if kind == 'bounds':
        handler = _run_bounds
    elif kind == 'verify':
        handler = _run_verify
    elif kind.startswith('certify:'):
        handler = _run_certify
    else:
        handler = _run_sweep
    start = time.perf_counter()
    try:
        status, result = handler(ctx, task)
        error = None
    except TASK_ERRORS as exc:
        status, result, error = TaskStatus.ERROR, {}, error_payload(exc)
        logger.warning(json.dumps({"event": "task_failed", "index": index, "type": kind, **error}))
    return TaskResult(index, kind, status, result, error, time.perf_counter() - start)


def run_experiment(config: ExperimentConfig, seed: Optional[int] = None,
                   grid_points: Optional[int] = None, include_timing: bool = False,
                   tasks: Optional[List[dict]] = None) -> Report:
    """Run every task in order. Raises ConfigError if the shared objects cannot be built."""
    seed = effective_seed(config, seed)
    ctx = prepare(config, seed, grid_points)
    tasks = config.tasks if tasks is None else tasks
    echo = config.echo()
    echo.update(seed=seed, tasks=tasks,
                grid={"x_min": ctx.grid.x_min, "x_max": ctx.grid.x_max, "n_points": ctx.grid.n_points})
    report = Report(echo, seed, include_timing=include_timing)
    start = time.perf_counter()
    logger.info(json.dumps({"event": "experiment_started", "experiment": config.name,
                            "tasks": len(tasks), "seed": seed}))
    for index, task in enumerate(tasks):
        result = run_task(ctx, index, task)
        report.results.append(result)
        task_completed.send(sender=run_experiment, config=config, result=result)
    report.total_elapsed = time.perf_counter() - start
    logger.info(json.dumps({"event": "experiment_finished", "experiment": config.name,
                            "failures": len(report.failures)}))
    return report


def sweep_experiment(config: ExperimentConfig, param: str, values, theorem: Optional[str] = None,
                     p: Optional[int] = None, **kwargs) -> Report:
    """Run a single sweep task assembled from arguments instead of the config's task list."""
    raw = {"type": f"sweep:{param}", "values": list(values)}
    if theorem:
        raw["theorem"] = theorem
    if p is not None:
        raw["p"] = p
    task = validate_task(raw)
    return run_experiment(config, tasks=[task], **kwargs)


# -- output ----------------------------------------------------------------------------

def report_path(config: ExperimentConfig, out=None) -> Path:
    if out:
        return Path(out)
    if config.output:
        return config.resolve(config.output)
    return Path(settings.FRAMES_REPORT_DIR) / f'{slugify(config.name) or "experiment"}.json'


def render_report(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + '\n'


def sweep_table(report: Report) -> Optional[Tuple[List[str], List[dict]]]:
    """Header and rows over all sweep tasks, or None if the report has none."""
    header, rows = ['task'], []
    for result in report.results:
        if not result.type.startswith('sweep:') or not result.result:
            continue
        for column in result.result['columns']:
            if column not in header:
                header.append(column)
        for row in result.result['rows']:
            flat = {"task": result.index, **row}
            if 'error' in flat:
                flat['error'] = flat['error'].get('message', '')
            rows.append(flat)
    if len(header) == 1:
        return None
    return header, rows


def write_report(report: Report, path) -> Tuple[Path, Optional[Path]]:
    """Write the JSON report and, for sweeps, a CSV table beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report))
    table = sweep_table(report)
    csv_path = None
    if table is not None:
        header, rows = table
        csv_path = path.with_suffix('.csv')
        with csv_path.open('w', newline='') as handle:
            writer = csv.DictWriter(handle, fieldnames=header, extrasaction='ignore')
            writer.writeheader()
            writer.writerows(rows)
    logger.info(json.dumps({"event": "report_written", "path": str(path),
                            "table": str(csv_path) if csv_path else None}))
    return path, csv_path
