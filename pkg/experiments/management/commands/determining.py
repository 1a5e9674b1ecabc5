from ..base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run the determining-interpolant experiment for a config'

    def perform(self, service, config, **options):
        record, outcome = service.determining(config)
        report = outcome.summary['determining']
        return (
            f"Full difference {report['peak_full_difference']:.3e} (peak) -> "
            f"{report['terminal_full_difference']:.3e}: {outcome.directory}"
        )
