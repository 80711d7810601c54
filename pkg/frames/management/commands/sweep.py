"""
Django management command that sweeps one parameter of an experiment file.
"""

from frames.exceptions import ConfigError
from frames.experiments import sweep_experiment
from frames.forms import SWEEP_PARAMS, THEOREMS, parse_values
from frames.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Sweep one parameter and write a JSON report with a CSV table beside it'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--param',
            required=True,
            choices=SWEEP_PARAMS,
            help='Parameter to sweep'
        )
        parser.add_argument(
            '--values',
            required=True,
            help="Comma-separated values, decimals or p/q fractions (e.g. '1/4,1/3,1/2')"
        )
        parser.add_argument(
            '--theorem',
            default='thm1-compact',
            choices=THEOREMS + ('bounds',),
            help="Certificate evaluated per value, or 'bounds' (default: thm1-compact)"
        )
        parser.add_argument(
            '--p',
            type=int,
            default=None,
            help='Convolution power for cor-bspline when sweeping another parameter'
        )

    def handle(self, *args, **options):
        config = self.load(options)
        try:
            values = parse_values(options['values'])
        except (ValueError, ZeroDivisionError, OverflowError):
            values = None
        if not values:
            self.config_error(ConfigError('invalid sweep values',
                                          [f"values: cannot parse '{options['values']}'"]))
        self.stdout.write(f"Sweeping {options['param']} over {len(values)} values")
        try:
            report = sweep_experiment(config, options['param'], values, theorem=options['theorem'],
                                      p=options['p'], seed=options['seed'],
                                      grid_points=options['grid_points'],
                                      include_timing=options['include_timing'])
        except ConfigError as exc:
            self.config_error(exc)
        self.finish(config, report, options)
