from django.core.management.base import CommandError

from core.exceptions import InvalidParameterError

from ...models import SweepAxis
from ..base import ExperimentCommand


def parse_values(text):
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise InvalidParameterError(f"sweep values must be comma-separated numbers, got {text!r}")


class Command(ExperimentCommand):
    help = 'Run one experiment per value of mu, h or G'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--axis', required=True, choices=SweepAxis.values)
        parser.add_argument('--values', required=True, help='Comma-separated values, e.g. 1,2,4')
        parser.add_argument('--workers', type=int, help='Parallel runs (default MHDNUDGE SWEEP_WORKERS)')

    def perform(self, service, config, **options):
        if options.get('workers') is not None and options['workers'] < 1:
            raise CommandError('--workers must be at least 1', returncode=2)
        values = parse_values(options['values'])
        sweep, outcome = service.sweep(config, options['axis'], values, workers=options.get('workers'))
        for row in outcome.rows:
            status = row.get('error') or f"exit {row['exit_code']}, rate {row.get('rate')}"
            self.stdout.write(f"{options['axis']}={row['value']:g}: {status}")
        return f"Sweep finished with {outcome.failures} failed points: {outcome.directory}"
