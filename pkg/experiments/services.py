import logging

from django.utils import timezone

from core.exceptions import CheckFailure

from .artifacts import json_safe
from .models import ExperimentRun, RunAction, Scenario, Sweep
from .runner import exit_code_for, run_determining_scenario, run_scenario, run_sweep, verify_interpolant

logger = logging.getLogger(__name__)


class ExperimentService:
    """Runs experiments and keeps an ExperimentRun record of each one"""

    ACTIONS = {
        RunAction.RUN: run_scenario,
        RunAction.VERIFY_INTERPOLANT: verify_interpolant,
        RunAction.DETERMINING: run_determining_scenario,
    }

    def __init__(self, output_dir=None):
        self.output_dir = output_dir

    def _start(self, config, action):
        return ExperimentRun.objects.create(
            action=action,
            scenario=config.scenario,
            seed=config.seed,
            digest=config.digest,
            config_text=config.text,
        )

    def _close(self, record, exit_code, summary=None, directory='', error=''):
        record.exit_code = int(exit_code)
        record.summary = json_safe(summary or {})
        record.directory = str(directory)
        record.error = error
        record.finished_at = timezone.now()
        record.runtime_seconds = (record.finished_at - record.started_at).total_seconds()
        record.save()

    def execute(self, config, action=RunAction.RUN):
        """Run ``action`` on a config; raises CheckFailure when a check fails"""
        if action == RunAction.DETERMINING and config.scenario != Scenario.DETERMINING:
            config = config.with_values(scenario=Scenario.DETERMINING)
        record = self._start(config, action)
        try:
            outcome = self.ACTIONS[action](config, self.output_dir)
        except Exception as e:
            logger.error(f"{action} of {config.scenario} (seed {config.seed}) failed: {e}")
            self._close(record, exit_code_for(e), error=str(e))
            raise
        self._close(record, outcome.exit_code, outcome.summary, outcome.directory)
        if outcome.failed_checks:
            raise CheckFailure(outcome.failed_checks)
        return record, outcome

    def run(self, config):
        return self.execute(config, RunAction.RUN)

    def verify_interpolant(self, config):
        return self.execute(config, RunAction.VERIFY_INTERPOLANT)

    def determining(self, config):
        return self.execute(config, RunAction.DETERMINING)

    def sweep(self, config, axis, values, workers=None):
        """Run a sweep and record one ExperimentRun per point"""
        sweep = Sweep.objects.create(
            axis=axis,
            values=','.join(repr(float(value)) for value in values),
            config_text=config.text,
        )
        try:
            outcome = run_sweep(config, axis, values, workers=workers, output_dir=self.output_dir)
        except Exception as e:
            logger.error(f"Sweep {sweep.pk} over {axis} failed: {e}")
            sweep.finished_at = timezone.now()
            sweep.save()
            raise

        for row in outcome.rows:
            summary = row.get('summary') or {}
            ExperimentRun.objects.create(
                scenario=config.scenario,
                seed=config.seed,
                digest=summary.get('digest', ''),
                config_text=row.get('config_text', ''),
                directory=row.get('directory') or '',
                exit_code=row['exit_code'],
                summary=json_safe(summary),
                error=row.get('error') or '',
                runtime_seconds=summary.get('runtime_seconds'),
                sweep=sweep,
                sweep_value=row['value'],
                finished_at=timezone.now(),
            )
        sweep.directory = str(outcome.directory)
        sweep.failures = outcome.failures
        sweep.finished_at = timezone.now()
        sweep.save()
        return sweep, outcome
