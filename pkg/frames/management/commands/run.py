"""
Django management command that runs every task of an experiment file.
"""

from frames.exceptions import ConfigError
from frames.experiments import run_experiment
from frames.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run the tasks of an experiment file and write a JSON report'

    def handle(self, *args, **options):
        config = self.load(options)
        self.stdout.write(f"Running experiment '{config.name}' ({len(config.tasks)} tasks)")
        try:
            report = run_experiment(config, seed=options['seed'], grid_points=options['grid_points'],
                                    include_timing=options['include_timing'])
        except ConfigError as exc:
            self.config_error(exc)
        self.finish(config, report, options)
