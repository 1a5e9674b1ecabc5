from ..base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Estimate the config's interpolant constants and check them on fresh fields"

    def perform(self, service, config, **options):
        record, outcome = service.verify_interpolant(config)
        interpolant = outcome.summary['interpolant']
        constants = ', '.join(
            f"{name}={interpolant[name]:.6g}" for name in ('c1', 'c2', 'c3') if interpolant.get(name) is not None
        )
        return f"{interpolant['kind']} h={interpolant['h']}: {constants} ({outcome.directory})"
