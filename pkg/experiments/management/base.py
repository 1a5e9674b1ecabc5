import logging

from django.core.management.base import BaseCommand, CommandError

from ..config import load_config
from ..runner import exit_code_for
from ..services import ExperimentService

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """Shared options and the exception to exit-code translation

    Exit codes: 0 all checks passed, 1 unexpected error, 2 invalid config,
    3 numerical blow-up (NaN, CFL or stiffness), 4 a scenario check failed.
    """

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to a KEY=VALUE experiment config')
        parser.add_argument('--seed', type=int, help='Override the seed in the config')
        parser.add_argument('--output-dir', help='Directory that receives the run directories')

    def perform(self, service, config, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], seed=options.get('seed'))
            service = ExperimentService(output_dir=options.get('output_dir'))
            extra = {key: value for key, value in options.items() if key != 'config'}
            message = self.perform(service, config, **extra)
        except CommandError:
            raise
        except Exception as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {e}")
            raise CommandError(str(e), returncode=int(exit_code_for(e)))
        if message:
            self.stdout.write(self.style.SUCCESS(message))
