"""
Unit tests for management commands and signals
"""

import argparse
import csv
import json
import tempfile
from io import StringIO
from pathlib import Path
from types import SimpleNamespace
from unittest.mock import patch

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from frames.management.base import grid_points_value, seed_value
from frames.models import TaskResult, TaskStatus
from frames.signals import log_certificate_issued, log_task_completed
from frames.stability import paley_wiener_certificate


EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / 'experiments'

PALEY_MISMATCH = {
    "schema_version": 1,
    "name": "paley mismatch",
    "window": {"kind": "rect"},
    "lattice": {"a": 1, "b": 1, "n_range": [-8, 7], "k_range": [-4, 4]},
    "bounds": {"method": "rect-special"},
    "tasks": [
        {"type": "bounds"},
        {"type": "certify:paley-wiener", "lambda": "1/2", "mu": 2, "expect": "pass"},
    ],
}


class TestRunCommand(SimpleTestCase):
    """Test class for the run management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name) / 'report.json'

    def run_command(self, config, *args):
        stdout, stderr = StringIO(), StringIO()
        call_command('run', str(config), '--out', str(self.out), *args, stdout=stdout, stderr=stderr)
        return stdout.getvalue(), stderr.getvalue()

    @pytest.mark.timeout(60)
    def test_rect_bounds_report(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        stdout, _ = self.run_command(EXPERIMENTS_DIR / 'rect-bounds.json')
        self.assertIn("Running experiment 'rect orthonormal bounds' (1 tasks)", stdout)
        self.assertIn(f'Report written to {self.out}', stdout)
        report = json.loads(self.out.read_text())
        self.assertTrue(report['succeeded'])
        self.assertEqual(report['schema_version'], 1)
        bounds = report['results'][0]['result']['bounds']
        self.assertAlmostEqual(bounds['A'], 1.0)
        self.assertAlmostEqual(bounds['B'], 1.0)
        self.assertNotIn('elapsed_seconds', report['results'][0])

    @pytest.mark.timeout(60)
    def test_reports_are_byte_identical(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        config = EXPERIMENTS_DIR / 'rect-bounds.json'
        self.run_command(config, '--seed', '5')
        first = self.out.read_bytes()
        self.run_command(config, '--seed', '5')
        self.assertEqual(self.out.read_bytes(), first)
        self.assertEqual(json.loads(first)['seed'], 5)

    @pytest.mark.timeout(60)
    def test_include_timing(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        self.run_command(EXPERIMENTS_DIR / 'rect-bounds.json', '--include-timing')
        report = json.loads(self.out.read_text())
        self.assertIn('elapsed_seconds', report['results'][0])
        self.assertIn('total_elapsed_seconds', report)

    @pytest.mark.timeout(60)
    def test_paley_wiener_expectations_met(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        self.run_command(EXPERIMENTS_DIR / 'paley-wiener.json')
        report = json.loads(self.out.read_text())
        self.assertTrue(report['succeeded'])
        passed = [r['result']['certificate']['passed'] for r in report['results']]
        self.assertEqual(passed, [True, False])

    @pytest.mark.timeout(60)
    def test_expectation_mismatch_exits_one(self):
        """
        Test kind: unit_tests
        Original method: ExperimentCommand.finish
        """
        config = Path(self.tmp.name) / 'mismatch.json'
        config.write_text(json.dumps(PALEY_MISMATCH))
        with self.assertRaises(CommandError) as ctx:
            self.run_command(config)
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertEqual(str(ctx.exception), '1 of 2 tasks failed')
        report = json.loads(self.out.read_text())
        self.assertFalse(report['succeeded'])
        self.assertEqual([r['status'] for r in report['results']], ['ok', 'failed'])

    @pytest.mark.timeout(60)
    def test_invalid_config_exits_two(self):
        """
        Test kind: unit_tests
        Original method: ExperimentCommand.config_error
        """
        config = Path(self.tmp.name) / 'invalid.json'
        config.write_text(json.dumps({**PALEY_MISMATCH, "colour": "blue"}))
        stderr = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command('run', str(config), '--out', str(self.out), stdout=StringIO(), stderr=stderr)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('config.colour: unknown key', stderr.getvalue())
        self.assertFalse(self.out.exists())

    @pytest.mark.timeout(60)
    def test_missing_config_exits_two(self):
        """
        Test kind: unit_tests
        Original method: ExperimentCommand.load
        """
        with self.assertRaises(CommandError) as ctx:
            self.run_command(Path(self.tmp.name) / 'absent.json')
        self.assertEqual(ctx.exception.returncode, 2)

    @pytest.mark.timeout(60)
    def test_bad_seed_flag(self):
        """
        Test kind: unit_tests
        Original method: seed_value
        """
        with self.assertRaises(CommandError):
            self.run_command(EXPERIMENTS_DIR / 'rect-bounds.json', '--seed', '-1')


class TestSweepCommand(SimpleTestCase):
    """Test class for the sweep management command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name) / 'sweep.json'

    def sweep(self, *args):
        stdout = StringIO()
        call_command('sweep', str(EXPERIMENTS_DIR / 'sweep-a.json'), '--out', str(self.out), *args,
                     stdout=stdout, stderr=StringIO())
        return stdout.getvalue()

    @pytest.mark.timeout(60)
    def test_sweep_time_step(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        stdout = self.sweep('--param', 'a', '--values', '1/4,1/3,1/2', '--theorem', 'bounds')
        table = self.out.with_suffix('.csv')
        self.assertIn('Sweeping a over 3 values', stdout)
        self.assertIn(f'Sweep table written to {table}', stdout)
        report = json.loads(self.out.read_text())
        self.assertEqual(len(report['results']), 1)
        result = report['results'][0]
        self.assertEqual(result['type'], 'sweep:a')
        rows = result['result']['rows']
        for row, expected in zip(rows, (4.0, 3.0, 2.0)):
            self.assertAlmostEqual(row['B'], expected)
        with table.open(newline='') as handle:
            reader = csv.reader(handle)
            self.assertEqual(next(reader), ['task', 'value', 'A', 'B', 'error'])
            self.assertEqual(len(list(reader)), 3)

    @pytest.mark.timeout(60)
    def test_unparseable_values(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        with self.assertRaises(CommandError) as ctx:
            self.sweep('--param', 'a', '--values', 'x,y', '--theorem', 'bounds')
        self.assertEqual(ctx.exception.returncode, 2)

    @pytest.mark.timeout(60)
    def test_p_sweep_needs_bspline_theorem(self):
        """
        Test kind: unit_tests
        Original method: Command.handle
        """
        with self.assertRaises(CommandError) as ctx:
            self.sweep('--param', 'p', '--values', '1,2')
        self.assertEqual(ctx.exception.returncode, 2)


class TestArgumentTypes(SimpleTestCase):
    """Test class for command-line argument parsers"""

    @pytest.mark.timeout(30)
    def test_seed_value(self):
        """
        Test kind: unit_tests
        Original method: seed_value
        """
        self.assertEqual(seed_value('0'), 0)
        self.assertEqual(seed_value(str(2 ** 64 - 1)), 2 ** 64 - 1)
        for bad in ('-1', str(2 ** 64), 'seven'):
            with self.assertRaises(argparse.ArgumentTypeError):
                seed_value(bad)

    @pytest.mark.timeout(30)
    def test_grid_points_value(self):
        """
        Test kind: unit_tests
        Original method: grid_points_value
        """
        self.assertEqual(grid_points_value('4096'), 4096)
        for bad in ('1000', '1', 'many'):
            with self.assertRaises(argparse.ArgumentTypeError):
                grid_points_value(bad)


class TestSignals(SimpleTestCase):
    """Test class for signal handlers"""

    def setUp(self):
        self.config = SimpleNamespace(name='signals')

    @pytest.mark.timeout(30)
    @patch('frames.signals.logger')
    def test_task_completed(self, mock_logger):
        """
        Test kind: unit_tests
        Original method: log_task_completed
        """
        result = TaskResult(3, 'bounds', TaskStatus.OK)
        log_task_completed(sender=None, config=self.config, result=result)
        payload = json.loads(mock_logger.info.call_args[0][0])
        self.assertEqual(payload, {"event": "task_completed", "experiment": "signals", "index": 3,
                                   "type": "bounds", "status": "ok"})

    @pytest.mark.timeout(30)
    @patch('frames.signals.logger')
    def test_certificate_as_expected(self, mock_logger):
        """
        Test kind: unit_tests
        Original method: log_certificate_issued
        """
        certificate = paley_wiener_certificate(1.0, 1.0, 0.0, 0.5)
        log_certificate_issued(sender=None, config=self.config, task={"expect": "pass"},
                               certificate=certificate)
        mock_logger.warning.assert_not_called()
        self.assertIn('certificate_issued', mock_logger.info.call_args[0][0])

    @pytest.mark.timeout(30)
    @patch('frames.signals.logger')
    def test_certificate_unexpected(self, mock_logger):
        """
        Test kind: unit_tests
        Original method: log_certificate_issued
        """
        certificate = paley_wiener_certificate(4.0, 5.0, 0.5, 2.0)
        log_certificate_issued(sender=None, config=self.config, task={"expect": "pass"},
                               certificate=certificate)
        mock_logger.info.assert_not_called()
        payload = json.loads(mock_logger.warning.call_args[0][0])
        self.assertEqual(payload['event'], 'certificate_unexpected')
        self.assertEqual(payload['expected'], 'pass')
        self.assertFalse(payload['passed'])

    @pytest.mark.timeout(60)
    @patch('frames.signals.logger')
    def test_signals_sent_by_run(self, mock_logger):
        """
        Test kind: unit_tests
        Original method: run_experiment
        """
        with tempfile.TemporaryDirectory() as tmp:
            call_command('run', str(EXPERIMENTS_DIR / 'paley-wiener.json'),
                         '--out', str(Path(tmp) / 'r.json'), stdout=StringIO(), stderr=StringIO())
        events = [json.loads(c[0][0])['event'] for c in mock_logger.info.call_args_list]
        self.assertEqual(events.count('task_completed'), 2)
        self.assertEqual(events.count('certificate_issued'), 2)
        mock_logger.warning.assert_not_called()
