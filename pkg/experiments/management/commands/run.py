from ..base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run the scenario described by an experiment config'

    def perform(self, service, config, **options):
        record, outcome = service.run(config)
        return f"{config.scenario} passed: {outcome.directory}"
