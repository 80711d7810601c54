"""
Validation of experiment files.

Each section of an experiment file is bound to a Django form; field errors
are collected as `section.field: message` diagnostics and raised together
as a ConfigError.
"""

import math
from fractions import Fraction
from pathlib import Path

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from .exceptions import ConfigError
from .gabor import JitterShape
from .models import SCHEMA_VERSION, ExperimentConfig
from .stability import Theorem


SWEEP_PARAMS = ('jitter-amplitude', 'a', 'b', 'p')
BOUNDS_METHODS = ('painless', 'fourier-side', 'rect-special', 'explicit')
THEOREMS = tuple(t.value for t in Theorem)
TOP_LEVEL_KEYS = {'schema_version', 'name', 'seed', 'window', 'lattice', 'jitter', 'bounds',
                  'grid', 'oracle', 'tasks', 'output'}


def parse_number(value) -> float:
    """A JSON number or a 'p/q' string as a float."""
    if isinstance(value, bool):
        raise ValueError('booleans are not numbers')
    number = Fraction(value.strip()) if isinstance(value, str) else Fraction(value)
    result = float(number)
    if not math.isfinite(result):
        raise ValueError('number must be finite')
    return result


def parse_values(text: str) -> list:
    """Comma-separated decimals or fractions, e.g. '1/4,1/3,0.5'."""
    return [parse_number(part) for part in text.split(',') if part.strip()]


class FractionField(forms.Field):
    default_error_messages = {
        'invalid': 'Enter a number or a fraction p/q.',
    }

    def to_python(self, value):
        if value in self.empty_values:
            return None
        try:
            return parse_number(value)
        except (ValueError, TypeError, ZeroDivisionError, OverflowError):
            raise ValidationError(self.error_messages['invalid'], code='invalid')


class IntegerRangeField(forms.Field):
    default_error_messages = {
        'invalid': 'Enter an inclusive range [lo, hi] of integers.',
        'empty': 'Range must satisfy lo <= hi.',
    }

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if not isinstance(value, (list, tuple)) or len(value) != 2 or \
                any(isinstance(v, bool) or not isinstance(v, int) for v in value):
            raise ValidationError(self.error_messages['invalid'], code='invalid')
        lo, hi = value
        if lo > hi:
            raise ValidationError(self.error_messages['empty'], code='empty')
        return [lo, hi]


class FloatListField(forms.Field):
    default_error_messages = {
        'invalid': 'Enter a list of numbers or fractions.',
        'empty': 'Enter at least one value.',
    }

    def to_python(self, value):
        if value is None or value == '':
            return None
        try:
            if isinstance(value, str):
                values = parse_values(value)
            elif isinstance(value, (list, tuple)):
                values = [parse_number(v) for v in value]
            else:
                raise TypeError
        except (ValueError, TypeError, ZeroDivisionError, OverflowError):
            raise ValidationError(self.error_messages['invalid'], code='invalid')
        if not values:
            raise ValidationError(self.error_messages['empty'], code='empty')
        return values


def _int_keyed(mapping, name: str) -> dict:
    if not isinstance(mapping, dict):
        raise ValidationError(f'{name} must be an object mapping integers to numbers.')
    cleaned = {}
    for key, value in mapping.items():
        try:
            index = int(key)
            cleaned[str(index)] = parse_number(value)
        except (ValueError, TypeError, ZeroDivisionError):
            raise ValidationError(f'{name} has a non-numeric entry {key!r}: {value!r}.')
    return cleaned


class ExperimentForm(forms.Form):
    """Top-level experiment metadata."""
    schema_version = forms.IntegerField()
    name = forms.CharField(max_length=200)
    seed = forms.IntegerField(required=False, min_value=0)
    output = forms.CharField(required=False)

    def clean_schema_version(self):
        version = self.cleaned_data.get('schema_version')
        if version != SCHEMA_VERSION:
            raise ValidationError(f"Unsupported schema version {version}; expected {SCHEMA_VERSION}.")
        return version


class WindowForm(forms.Form):
    kind = forms.ChoiceField(choices=[(k, k) for k in ('rect', 'bspline', 'sinc', 'sampled')])
    p = forms.IntegerField(required=False, min_value=1)
    M = forms.IntegerField(required=False, min_value=1)
    path = forms.CharField(required=False)
    band_limit = FractionField(required=False)
    derivative = forms.BooleanField(required=False)

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get('kind')
        if kind == 'bspline' and cleaned.get('p') is None:
            self.add_error('p', 'bspline windows need an order p.')
        if kind == 'sinc' and cleaned.get('M') is None:
            self.add_error('M', 'sinc windows need a bandwidth M.')
        if kind == 'sampled' and not cleaned.get('path'):
            self.add_error('path', 'sampled windows need a CSV path.')
        if cleaned.get('derivative') and (kind == 'rect' or (kind == 'bspline' and cleaned.get('p') == 1)):
            self.add_error('derivative', 'distributional derivative: the window is discontinuous.')
        return cleaned


class LatticeForm(forms.Form):
    a = FractionField()
    b = FractionField()
    n_range = IntegerRangeField()
    k_range = IntegerRangeField()

    def clean_a(self):
        a = self.cleaned_data.get('a')
        if a is not None and a <= 0:
            raise ValidationError('Time step a must be positive.')
        return a

    def clean_b(self):
        b = self.cleaned_data.get('b')
        if b is not None and b <= 0:
            raise ValidationError('Frequency step b must be positive.')
        return b

    def clean(self):
        cleaned = super().clean()
        a, b = cleaned.get('a'), cleaned.get('b')
        if a and b and a * b > 1 + 1e-12:
            raise ValidationError(f'necessary density condition violated: ab = {a * b:g} > 1')
        return cleaned


class JitterForm(forms.Form):
    shape = forms.ChoiceField(choices=[(s.value, s.value) for s in JitterShape if s is not JitterShape.EXPLICIT],
                              required=False)
    path = forms.CharField(required=False)
    bound = FractionField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    n_range = IntegerRangeField(required=False)
    k_range = IntegerRangeField(required=False)
    peak = FractionField(required=False)
    ratio = FractionField(required=False)
    n_max = forms.IntegerField(required=False, min_value=0)
    columns = forms.JSONField(required=False)
    value = FractionField(required=False)
    values = forms.JSONField(required=False)
    row_amplitudes = forms.JSONField(required=False)
    column_weights = forms.JSONField(required=False)

    def clean_columns(self):
        columns = self.cleaned_data.get('columns')
        if columns is None:
            return None
        if not isinstance(columns, list) or any(isinstance(k, bool) or not isinstance(k, int) for k in columns):
            raise ValidationError('columns must be a list of integers.')
        return columns

    def clean_ratio(self):
        ratio = self.cleaned_data.get('ratio')
        if ratio is not None and not 0 < ratio < 1:
            raise ValidationError('ratio must lie in (0, 1).')
        return ratio

    def clean(self):
        cleaned = super().clean()
        shape, path = cleaned.get('shape'), cleaned.get('path')
        if not shape and not path:
            raise ValidationError('Give either a jitter shape or a CSV path.')
        if shape and path:
            raise ValidationError('Give a jitter shape or a CSV path, not both.')
        required = {
            'uniform-random': ('bound', 'n_range', 'k_range'),
            'geometric-in-n': ('peak', 'ratio'),
            'separable': ('row_amplitudes', 'column_weights'),
        }.get(shape, ())
        for name in required:
            if cleaned.get(name) in (None, ''):
                self.add_error(name, f'{shape} jitter needs {name}.')
        if shape == 'column-constant':
            if cleaned.get('values') is None and (cleaned.get('value') is None or cleaned.get('k_range') is None):
                self.add_error('value', 'column-constant jitter needs value with k_range, or values.')
        for name in ('values', 'row_amplitudes', 'column_weights'):
            if cleaned.get(name) is not None:
                try:
                    cleaned[name] = _int_keyed(cleaned[name], name)
                except ValidationError as exc:
                    self.add_error(name, exc)
        return cleaned


class BoundsForm(forms.Form):
    method = forms.ChoiceField(choices=[(m, m) for m in BOUNDS_METHODS])
    A = FractionField(required=False)
    B = FractionField(required=False)
    trunc = forms.IntegerField(required=False, min_value=2)

    def clean(self):
        cleaned = super().clean()
        if cleaned.get('method') == 'explicit':
            A, B = cleaned.get('A'), cleaned.get('B')
            if A is None or B is None:
                raise ValidationError('explicit bounds need A and B.')
            if not 0 < A <= B:
                raise ValidationError('explicit bounds must satisfy 0 < A <= B.')
        return cleaned


class GridForm(forms.Form):
    x_min = FractionField()
    x_max = FractionField()
    n_points = forms.IntegerField(min_value=2)

    def clean_n_points(self):
        n = self.cleaned_data.get('n_points')
        if n is not None and n & (n - 1):
            raise ValidationError('n_points must be a power of two.')
        return n

    def clean(self):
        cleaned = super().clean()
        lo, hi = cleaned.get('x_min'), cleaned.get('x_max')
        if lo is not None and hi is not None and lo >= hi:
            raise ValidationError('grid requires x_min < x_max.')
        return cleaned


class OracleForm(forms.Form):
    subspace_center = FractionField()
    subspace_width = FractionField()
    modes = forms.IntegerField(min_value=1)
    domain = forms.ChoiceField(choices=[('time', 'time'), ('frequency', 'frequency')], required=False)
    taper = forms.ChoiceField(choices=[('box', 'box'), ('hann', 'hann')], required=False)
    half_width = FractionField(required=False)
    tolerance = FractionField(required=False)

    def clean_subspace_width(self):
        width = self.cleaned_data.get('subspace_width')
        if width is not None and width <= 0:
            raise ValidationError('subspace_width must be positive.')
        return width


class TaskForm(forms.Form):
    type = forms.CharField()
    expect = forms.ChoiceField(choices=[('pass', 'pass'), ('fail', 'fail')], required=False)
    p = forms.IntegerField(required=False, min_value=1)
    lam = FractionField(required=False)
    mu = FractionField(required=False)
    column_deltas = forms.JSONField(required=False)
    values = FloatListField(required=False)
    theorem = forms.ChoiceField(choices=[(t, t) for t in THEOREMS + ('bounds',)], required=False)

    def clean_type(self):
        kind = self.cleaned_data.get('type', '')
        if kind in ('bounds', 'verify'):
            return kind
        prefix, _, rest = kind.partition(':')
        if prefix == 'certify' and rest in THEOREMS:
            return kind
        if prefix == 'sweep' and rest in SWEEP_PARAMS:
            return kind
        raise ValidationError(f"Unknown task type '{kind}'.")

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get('type') or ''
        if cleaned.get('column_deltas') is not None:
            try:
                cleaned['column_deltas'] = _int_keyed(cleaned['column_deltas'], 'column_deltas')
            except ValidationError as exc:
                self.add_error('column_deltas', exc)
        if kind == 'certify:paley-wiener':
            for name in ('lam', 'mu'):
                value = cleaned.get(name)
                if value is None:
                    self.add_error(name, 'paley-wiener certificates need lambda and mu.')
                elif value < 0:
                    self.add_error(name, 'must be nonnegative.')
        if kind == 'certify:cor-bspline' and cleaned.get('p') is None:
            self.add_error('p', 'cor-bspline certificates need p.')
        if kind.startswith('sweep:'):
            values = cleaned.get('values')
            if not values and 'values' not in self.errors:
                self.add_error('values', 'Enter at least one value.')
            theorem = cleaned.get('theorem') or 'thm1-compact'
            cleaned['theorem'] = theorem
            if kind == 'sweep:p':
                if theorem != 'cor-bspline':
                    self.add_error('theorem', 'sweeping p needs the cor-bspline theorem.')
                if values and any(v != int(v) or v < 1 for v in values):
                    self.add_error('values', 'p values must be positive integers.')
            elif theorem == 'cor-bspline' and cleaned.get('p') is None:
                self.add_error('p', 'cor-bspline sweeps need p.')
            if theorem == 'paley-wiener':
                self.add_error('theorem', 'paley-wiener takes explicit constants and cannot be swept.')
        return cleaned


def _bind(form_class, section: str, payload, diagnostics: list, rename=None):
    if not isinstance(payload, dict):
        diagnostics.append(f'{section}: must be an object')
        return None
    data = dict(payload)
    for old, new in (rename or {}).items():
        if old in data:
            data[new] = data.pop(old)
    unknown = sorted(set(data) - set(form_class.base_fields))
    for key in unknown:
        diagnostics.append(f"{section}.{key}: unknown key")
    form = form_class(data=data)
    if not form.is_valid():
        original = {new: old for old, new in (rename or {}).items()}
        for field, errors in form.errors.items():
            name = section if field == '__all__' else f'{section}.{original.get(field, field)}'
            diagnostics.extend(f'{name}: {message}' for message in errors)
        return None
    cleaned = {key: value for key, value in form.cleaned_data.items()
               if value is not None and value != '' and value is not False}
    for old, new in (rename or {}).items():
        if new in cleaned:
            cleaned[old] = cleaned.pop(new)
    return cleaned


def validate_task(raw, section: str = 'task') -> dict:
    """Validate a single task entry, e.g. one assembled from command-line flags."""
    diagnostics = []
    task = _bind(TaskForm, section, raw, diagnostics, rename={'lambda': 'lam'})
    if diagnostics:
        raise ConfigError('task is invalid', diagnostics)
    return task


def default_grid() -> dict:
    half = float(settings.FRAMES_GRID_HALF_WIDTH)
    return {"x_min": -half, "x_max": half, "n_points": int(settings.FRAMES_GRID_POINTS)}


DEFAULT_ORACLE = {"subspace_center": 0, "subspace_width": 8, "modes": 16, "domain": "time"}


def validate_experiment(data, base_dir=None) -> ExperimentConfig:
    """Validate a parsed experiment file; raises ConfigError with every diagnostic."""
    base_dir = Path(base_dir or '.')
    diagnostics = []
    if not isinstance(data, dict):
        raise ConfigError('experiment config is invalid', ['config: must be a JSON object'])
    for key in sorted(set(data) - TOP_LEVEL_KEYS):
        diagnostics.append(f"config.{key}: unknown key")
    head = _bind(ExperimentForm, 'config',
                 {k: data.get(k) for k in ('schema_version', 'name', 'seed', 'output') if k in data},
                 diagnostics)
    if 'window' not in data:
        diagnostics.append('window: section is required')
    if 'lattice' not in data:
        diagnostics.append('lattice: section is required')
    window = _bind(WindowForm, 'window', data.get('window', {}), diagnostics)
    lattice = _bind(LatticeForm, 'lattice', data.get('lattice', {}), diagnostics)
    jitter = _bind(JitterForm, 'jitter', data.get('jitter', {"shape": "none"}), diagnostics)
    bounds = _bind(BoundsForm, 'bounds', data.get('bounds', {"method": "painless"}), diagnostics)
    grid = _bind(GridForm, 'grid', data.get('grid', default_grid()), diagnostics)
    oracle = _bind(OracleForm, 'oracle', data.get('oracle', DEFAULT_ORACLE), diagnostics)

    tasks = []
    raw_tasks = data.get('tasks')
    if not isinstance(raw_tasks, list) or not raw_tasks:
        diagnostics.append('tasks: must be a nonempty list')
    else:
        for index, raw in enumerate(raw_tasks):
            task = _bind(TaskForm, f'tasks[{index}]', raw, diagnostics, rename={'lambda': 'lam'})
            if task is not None:
                tasks.append(task)

    for section, payload in (('window', window), ('jitter', jitter)):
        if payload and payload.get('path'):
            path = Path(payload['path'])
            resolved = path if path.is_absolute() else base_dir / path
            if not resolved.exists():
                diagnostics.append(f"{section}.path: file '{payload['path']}' not found")

    if grid and oracle:
        half = oracle['subspace_width'] / 2
        if oracle['subspace_center'] - half < grid['x_min'] or oracle['subspace_center'] + half > grid['x_max']:
            diagnostics.append('oracle.subspace_width: test subspace extends beyond the grid')

    if diagnostics:
        raise ConfigError('experiment config is invalid', diagnostics)
    oracle.setdefault('domain', 'time')
    return ExperimentConfig(
        name=head['name'], window=window, lattice=lattice, jitter=jitter, bounds=bounds,
        grid=grid, oracle=oracle, tasks=tasks, seed=head.get('seed'), output=head.get('output'),
        base_dir=base_dir, schema_version=head['schema_version'],
    )
