"""
Unit tests for experiment file validation
"""

import copy
import tempfile
from pathlib import Path

import pytest
from django.test import SimpleTestCase

from frames.exceptions import ConfigError
from frames.experiments import load_config
from frames.forms import (
    IntegerRangeField,
    LatticeForm,
    TaskForm,
    parse_number,
    parse_values,
    validate_experiment,
    validate_task,
)


EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / 'experiments'

MINIMAL = {
    "schema_version": 1,
    "name": "minimal",
    "window": {"kind": "rect"},
    "lattice": {"a": 1, "b": 1, "n_range": [-32, 31], "k_range": [-12, 12]},
    "tasks": [{"type": "bounds"}],
}


class TestNumberParsing(SimpleTestCase):
    """Test class for number and fraction parsing"""

    @pytest.mark.timeout(30)
    def test_parse_number(self):
        """
        Test kind: unit_tests
        Original method: parse_number
        """
        self.assertEqual(parse_number('1/4'), 0.25)
        self.assertEqual(parse_number(' 3/2 '), 1.5)
        self.assertEqual(parse_number(2), 2.0)
        self.assertEqual(parse_number(0.1), 0.1)

    @pytest.mark.timeout(30)
    def test_parse_number_rejects(self):
        """
        Test kind: unit_tests
        Original method: parse_number
        """
        for value in (True, 'abc'):
            with self.assertRaises(ValueError):
                parse_number(value)
        with self.assertRaises(ZeroDivisionError):
            parse_number('1/0')

    @pytest.mark.timeout(30)
    def test_parse_values(self):
        """
        Test kind: unit_tests
        Original method: parse_values
        """
        self.assertEqual(parse_values('1/4, 0.5,1'), [0.25, 0.5, 1.0])
        self.assertEqual(parse_values(''), [])


class TestFields(SimpleTestCase):
    """Test class for custom form fields"""

    @pytest.mark.timeout(30)
    def test_integer_range(self):
        """
        Test kind: unit_tests
        Original method: IntegerRangeField.to_python
        """
        field = IntegerRangeField()
        self.assertEqual(field.clean([-2, 3]), [-2, 3])
        for bad in ([3, -2], [1.5, 2], [True, 2], [1, 2, 3], 'x'):
            with self.assertRaises(Exception):
                field.clean(bad)

    @pytest.mark.timeout(30)
    def test_lattice_form_density(self):
        """
        Test kind: unit_tests
        Original method: LatticeForm.clean
        """
        form = LatticeForm(data={"a": "1/2", "b": 3, "n_range": [0, 1], "k_range": [0, 1]})
        self.assertFalse(form.is_valid())
        self.assertIn('necessary density condition violated', form.errors['__all__'][0])
        form = LatticeForm(data={"a": "1/2", "b": 2, "n_range": [0, 1], "k_range": [0, 1]})
        self.assertTrue(form.is_valid())
        self.assertEqual(form.cleaned_data['a'], 0.5)

    @pytest.mark.timeout(30)
    def test_lattice_form_positive_steps(self):
        """
        Test kind: unit_tests
        Original method: LatticeForm.clean_a
        """
        form = LatticeForm(data={"a": -1, "b": 1, "n_range": [0, 1], "k_range": [0, 1]})
        self.assertFalse(form.is_valid())
        self.assertIn('a', form.errors)


class TestTaskValidation(SimpleTestCase):
    """Test class for TaskForm and validate_task"""

    @pytest.mark.timeout(30)
    def test_paley_wiener_task(self):
        """
        Test kind: unit_tests
        Original method: validate_task
        """
        task = validate_task({"type": "certify:paley-wiener", "lambda": 0, "mu": "1/2"})
        self.assertEqual(task, {"type": "certify:paley-wiener", "lambda": 0.0, "mu": 0.5})

    @pytest.mark.timeout(30)
    def test_paley_wiener_needs_constants(self):
        """
        Test kind: unit_tests
        Original method: TaskForm.clean
        """
        with self.assertRaises(ConfigError) as ctx:
            validate_task({"type": "certify:paley-wiener", "lambda": 0})
        self.assertIn('task.mu: paley-wiener certificates need lambda and mu.', ctx.exception.diagnostics)

    @pytest.mark.timeout(30)
    def test_unknown_type(self):
        """
        Test kind: unit_tests
        Original method: TaskForm.clean_type
        """
        form = TaskForm(data={"type": "certify:unknown"})
        self.assertFalse(form.is_valid())
        self.assertEqual(form.errors['type'], ["Unknown task type 'certify:unknown'."])

    @pytest.mark.timeout(30)
    def test_sweep_defaults(self):
        """
        Test kind: unit_tests
        Original method: validate_task
        """
        task = validate_task({"type": "sweep:a", "values": "1/4,1/2"})
        self.assertEqual(task['theorem'], 'thm1-compact')
        self.assertEqual(task['values'], [0.25, 0.5])

    @pytest.mark.timeout(30)
    def test_sweep_p_rules(self):
        """
        Test kind: unit_tests
        Original method: TaskForm.clean
        """
        with self.assertRaises(ConfigError) as ctx:
            validate_task({"type": "sweep:p", "values": [1, 2]})
        self.assertIn('task.theorem: sweeping p needs the cor-bspline theorem.', ctx.exception.diagnostics)
        with self.assertRaises(ConfigError) as ctx:
            validate_task({"type": "sweep:p", "values": [1.5], "theorem": "cor-bspline"})
        self.assertIn('task.values: p values must be positive integers.', ctx.exception.diagnostics)
        task = validate_task({"type": "sweep:p", "values": [1, 2], "theorem": "cor-bspline"})
        self.assertEqual(task['values'], [1.0, 2.0])

    @pytest.mark.timeout(30)
    def test_paley_wiener_cannot_be_swept(self):
        """
        Test kind: unit_tests
        Original method: TaskForm.clean
        """
        with self.assertRaises(ConfigError):
            validate_task({"type": "sweep:a", "values": [1], "theorem": "paley-wiener"})

    @pytest.mark.timeout(30)
    def test_unknown_task_key(self):
        """
        Test kind: unit_tests
        Original method: validate_task
        """
        with self.assertRaises(ConfigError) as ctx:
            validate_task({"type": "bounds", "colour": "red"})
        self.assertEqual(ctx.exception.diagnostics, ['task.colour: unknown key'])


class TestValidateExperiment(SimpleTestCase):
    """Test class for validate_experiment"""

    def diagnostics_for(self, data, base_dir=None):
        with self.assertRaises(ConfigError) as ctx:
            validate_experiment(data, base_dir)
        return ctx.exception.diagnostics

    @pytest.mark.timeout(30)
    def test_minimal_defaults(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        config = validate_experiment(copy.deepcopy(MINIMAL))
        self.assertEqual(config.name, 'minimal')
        self.assertEqual(config.jitter, {"shape": "none"})
        self.assertEqual(config.bounds, {"method": "painless"})
        self.assertEqual(config.grid, {"x_min": -16.0, "x_max": 16.0, "n_points": 2048})
        self.assertEqual(config.oracle['domain'], 'time')
        self.assertIsNone(config.seed)
        self.assertEqual(config.lattice['a'], 1.0)

    @pytest.mark.timeout(30)
    def test_unknown_top_level_key(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        data = {**copy.deepcopy(MINIMAL), "colour": "blue"}
        self.assertIn('config.colour: unknown key', self.diagnostics_for(data))

    @pytest.mark.timeout(30)
    def test_required_sections(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        data = copy.deepcopy(MINIMAL)
        del data['window']
        data['tasks'] = []
        diagnostics = self.diagnostics_for(data)
        self.assertIn('window: section is required', diagnostics)
        self.assertIn('tasks: must be a nonempty list', diagnostics)

    @pytest.mark.timeout(30)
    def test_schema_version(self):
        """
        Test kind: unit_tests
        Original method: ExperimentForm.clean_schema_version
        """
        data = {**copy.deepcopy(MINIMAL), "schema_version": 2}
        self.assertIn('config.schema_version: Unsupported schema version 2; expected 1.',
                      self.diagnostics_for(data))

    @pytest.mark.timeout(30)
    def test_collects_every_problem(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        data = copy.deepcopy(MINIMAL)
        data['lattice']['b'] = 2
        data['grid'] = {"x_min": -16, "x_max": 16, "n_points": 1000}
        data['tasks'] = [{"type": "certify:nothing"}]
        diagnostics = self.diagnostics_for(data)
        self.assertIn('lattice: necessary density condition violated: ab = 2 > 1', diagnostics)
        self.assertIn('grid.n_points: n_points must be a power of two.', diagnostics)
        self.assertIn("tasks[0].type: Unknown task type 'certify:nothing'.", diagnostics)

    @pytest.mark.timeout(30)
    def test_jitter_shape_or_path(self):
        """
        Test kind: unit_tests
        Original method: JitterForm.clean
        """
        data = {**copy.deepcopy(MINIMAL), "jitter": {"shape": "none", "path": "j.csv"}}
        self.assertIn('jitter: Give a jitter shape or a CSV path, not both.', self.diagnostics_for(data))
        data = {**copy.deepcopy(MINIMAL), "jitter": {"shape": "uniform-random", "bound": "1/50"}}
        diagnostics = self.diagnostics_for(data)
        self.assertIn('jitter.n_range: uniform-random jitter needs n_range.', diagnostics)

    @pytest.mark.timeout(30)
    def test_missing_files(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        with tempfile.TemporaryDirectory() as tmp:
            data = {**copy.deepcopy(MINIMAL), "window": {"kind": "sampled", "path": "missing.csv"}}
            self.assertIn("window.path: file 'missing.csv' not found", self.diagnostics_for(data, tmp))
            (Path(tmp) / 'missing.csv').write_text('x,value\n0,1\n1,1\n')
            config = validate_experiment(data, tmp)
            self.assertEqual(config.resolve('missing.csv'), Path(tmp) / 'missing.csv')

    @pytest.mark.timeout(30)
    def test_subspace_inside_grid(self):
        """
        Test kind: unit_tests
        Original method: validate_experiment
        """
        data = {**copy.deepcopy(MINIMAL),
                "oracle": {"subspace_center": 14, "subspace_width": 8, "modes": 8}}
        self.assertIn('oracle.subspace_width: test subspace extends beyond the grid',
                      self.diagnostics_for(data))

    @pytest.mark.timeout(30)
    def test_error_message_lists_diagnostics(self):
        """
        Test kind: unit_tests
        Original method: ConfigError.__str__
        """
        data = {**copy.deepcopy(MINIMAL), "colour": "blue"}
        with self.assertRaises(ConfigError) as ctx:
            validate_experiment(data)
        self.assertEqual(str(ctx.exception), 'experiment config is invalid: config.colour: unknown key')

    @pytest.mark.timeout(30)
    def test_shipped_experiments_validate(self):
        """
        Test kind: unit_tests
        Original method: load_config
        """
        paths = sorted(EXPERIMENTS_DIR.glob('*.json'))
        self.assertGreaterEqual(len(paths), 9)
        for path in paths:
            with self.subTest(path=path.name):
                config = load_config(path)
                self.assertTrue(config.tasks)
                self.assertEqual(config.base_dir, path.parent)

    @pytest.mark.timeout(30)
    def test_load_config_errors(self):
        """
        Test kind: unit_tests
        Original method: load_config
        """
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigError) as ctx:
                load_config(Path(tmp) / 'absent.json')
            self.assertIn('not found', ctx.exception.diagnostics[0])
            broken = Path(tmp) / 'broken.json'
            broken.write_text('{"schema_version": 1,')
            with self.assertRaises(ConfigError) as ctx:
                load_config(broken)
            self.assertIn('invalid JSON', ctx.exception.diagnostics[0])
