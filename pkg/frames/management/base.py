"""
Shared plumbing for the experiment commands.

Exit codes: 0 when every task succeeded, 1 when a task failed, 2 when the
experiment file (or a flag) is invalid.
"""

import argparse
import logging

from django.core.management.base import BaseCommand, CommandError

from frames.exceptions import ConfigError
from frames.experiments import load_config, report_path, write_report


logger = logging.getLogger('frames')

EXIT_TASK_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def seed_value(text):
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed '{text}'")
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError('seed must be an unsigned 64-bit integer')
    return seed


def grid_points_value(text):
    try:
        points = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid size '{text}'")
    if points < 2 or points & (points - 1):
        raise argparse.ArgumentTypeError('grid points must be a power of two')
    return points


class ExperimentCommand(BaseCommand):

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to the experiment JSON file')
        parser.add_argument(
            '--seed',
            type=seed_value,
            default=None,
            help='PRNG seed (default: the config seed, then FRAMES_SEED)'
        )
        parser.add_argument(
            '--grid-points',
            type=grid_points_value,
            default=None,
            help='Override the oracle grid size (power of two)'
        )
        parser.add_argument(
            '--out',
            default=None,
            help='Report path (default: the config output, then FRAMES_REPORT_DIR/<name>.json)'
        )
        parser.add_argument(
            '--include-timing',
            action='store_true',
            help='Add elapsed times to the report; such reports are not byte-identical across runs'
        )

    def load(self, options):
        try:
            return load_config(options['config'])
        except ConfigError as exc:
            self.config_error(exc)

    def config_error(self, exc):
        for diagnostic in exc.diagnostics:
            self.stderr.write(self.style.ERROR(diagnostic))
        raise CommandError(exc.args[0], returncode=EXIT_CONFIG_ERROR)

    def finish(self, config, report, options):
        path, table = write_report(report, report_path(config, options['out']))
        for result in report.results:
            if result.status == 'ok':
                self.stdout.write(self.style.SUCCESS(str(result)))
            elif result.status == 'failed':
                self.stdout.write(self.style.WARNING(str(result)))
            else:
                self.stderr.write(self.style.ERROR(f"{result}: {result.error['message']}"))
        self.stdout.write(f"Report written to {path}")
        if table:
            self.stdout.write(f"Sweep table written to {table}")
        if report.exit_code:
            raise CommandError(f"{len(report.failures)} of {len(report.results)} tasks failed",
                               returncode=EXIT_TASK_FAILURE)
