import io
import json
import math
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from numpy.testing import assert_allclose

from core.exceptions import (
    CflViolationError, CheckFailure, ConfigurationError, InvalidParameterError, NumericalInstabilityError,
    StiffnessError,
)
from observation.interpolants import InterpolantKind, InterpolantSpec

from .artifacts import json_safe
from .config import load_config, parse_config
from .models import ExperimentRun, RunAction, Scenario, Sweep, SweepAxis
from .runner import (
    DeterminingSetup, ExitCode, RunOutcome, auxiliary_gain, calibrate_interpolant, exit_code_for,
    run_determining_experiment, run_scenario, run_sweep, verify_interpolant,
)
from .services import ExperimentService

SLOW_TESTS = os.environ.get('MHDNUDGE_SLOW_TESTS') == '1'

# 16^2 grid, fixed-point attractor: a second or two per run
SMALL = """\
scenario=Baseline
seed=3
n=16
Re=2
Rm=2
dt=0.01
horizon=2
sample_interval=0.02
spinup=settle
spinup_max_time=10
f1_amplitude=1.0
g1_amplitude=0.5
interpolant=spectral
h=0.25
mask=all
mu=20
initial_l2=0.5
initial_k_max=4
verify_samples=20
"""


def small_config(**changes):
    config = parse_config(SMALL)
    return config.with_values(**changes) if changes else config


class ConfigParsingTests(SimpleTestCase):
    def test_missing_keys_take_defaults(self):
        config = parse_config("scenario=Baseline\n")
        self.assertEqual(config['n'], 64)
        self.assertEqual(config['mu'], 50.0)
        self.assertEqual(config.seed, 0)

    def test_unknown_key_reports_its_line(self):
        with self.assertRaises(ConfigurationError) as raised:
            parse_config("n=16\n# comment\nviscosity=1\n")
        self.assertIn(('viscosity', 3, 'unknown key'), raised.exception.diagnostics)

    def test_field_error_reports_its_line(self):
        with self.assertRaises(ConfigurationError) as raised:
            parse_config("Re=5\nn=15\n")
        lines = {key: line for key, line, _ in raised.exception.diagnostics}
        self.assertEqual(lines.get('n'), 2)

    def test_seed_override(self):
        self.assertEqual(parse_config(SMALL, seed=9).seed, 9)
        self.assertEqual(parse_config(SMALL).seed, 3)

    def test_modulation_offset_reaches_the_forcing(self):
        config = parse_config(
            SMALL + "forcing_kind=modulated\nmodulation_amplitude=0.5\n"
            "modulation_frequency=1\nmodulation_offset=2\n"
        )
        self.assertEqual(config['modulation_offset'], 2.0)
        self.assertEqual(config.modulation().offset, 2.0)
        forcing = config.forcing()
        self.assertAlmostEqual(forcing.factor(0.0), 2.5)
        self.assertAlmostEqual(forcing.factor(0.5), 1.5)

    def test_modulation_offset_defaults_to_one(self):
        config = parse_config(SMALL + "forcing_kind=modulated\nmodulation_amplitude=0.5\n")
        self.assertEqual(config.modulation().offset, 1.0)

    def test_modulation_amplitude_above_offset_is_rejected(self):
        text = SMALL + "forcing_kind=modulated\nmodulation_amplitude=1.5\nmodulation_offset=1\n"
        with self.assertRaises(ConfigurationError) as raised:
            parse_config(text)
        lines = {key: line for key, line, _ in raised.exception.diagnostics}
        self.assertEqual(lines.get('modulation_offset'), text.count('\n'))

    def test_digest_follows_values_not_layout(self):
        config = parse_config(SMALL)
        shuffled = ''.join(reversed(SMALL.splitlines(keepends=True)))
        self.assertEqual(parse_config(shuffled).digest, config.digest)
        self.assertEqual(parse_config(config.text).digest, config.digest)
        self.assertNotEqual(parse_config(SMALL, seed=4).digest, config.digest)
        self.assertEqual(len(config.digest), 12)

    def test_canonical_text_lists_every_key(self):
        text = parse_config(SMALL).text
        keys = [line.split('=', 1)[0] for line in text.splitlines()]
        self.assertIn('c_tilde_t2', keys)
        self.assertEqual(len(keys), len(set(keys)))

    def test_with_values_revalidates(self):
        config = small_config()
        self.assertEqual(config.with_values(mu=7.5)['mu'], 7.5)
        with self.assertRaises(ConfigurationError):
            config.with_values(h=0.3)

    def test_spectral_resolution_must_fit_the_dealiased_range(self):
        with self.assertRaises(ConfigurationError) as raised:
            parse_config(SMALL.replace('h=0.25', 'h=0.125'))
        self.assertEqual([key for key, _, _ in raised.exception.diagnostics], ['h'])

    def test_type2_needs_nodal_observations(self):
        with self.assertRaises(ConfigurationError) as raised:
            parse_config(SMALL.replace('scenario=Baseline', 'scenario=Type2'))
        keys = {key for key, _, _ in raised.exception.diagnostics}
        self.assertEqual(keys, {'interpolant', 'mask'})

    def test_sample_interval_must_resolve_the_window(self):
        text = SMALL.replace('sample_interval=0.02', 'sample_interval=0.1')
        with self.assertRaises(ConfigurationError) as raised:
            parse_config(text)
        self.assertEqual(raised.exception.diagnostics[0][0], 'sample_interval')

    def test_unreadable_path(self):
        with self.assertRaises(ConfigurationError):
            load_config('/nonexistent/baseline.env')

    def test_scaled_to_grashof(self):
        config = small_config()
        scaled = config.scaled_to_grashof(2 * config.grashof())
        assert_allclose(scaled.grashof(), 2 * config.grashof(), rtol=1e-12)
        assert_allclose(scaled['g1_amplitude'] / scaled['f1_amplitude'], 0.5)

    def test_required_orders_default_and_override(self):
        self.assertEqual(small_config().required_orders, 6.0)
        self.assertEqual(small_config(convergence_orders=3.0).required_orders, 3.0)


class ExitCodeTests(SimpleTestCase):
    def test_table(self):
        cases = [
            (NumericalInstabilityError(3, 0.03), ExitCode.BLOW_UP),
            (CflViolationError(0.1, 0.01, 5.0), ExitCode.BLOW_UP),
            (StiffnessError(200.0, 0.01), ExitCode.BLOW_UP),
            (ConfigurationError([('n', 1, 'bad')]), ExitCode.INVALID_CONFIG),
            (InvalidParameterError('Re must be positive'), ExitCode.INVALID_CONFIG),
            (CheckFailure(['l2_convergence']), ExitCode.CHECK_FAILED),
            (RuntimeError('boom'), ExitCode.UNEXPECTED),
        ]
        for error, code in cases:
            with self.subTest(error=type(error).__name__):
                self.assertEqual(exit_code_for(error), code)

    def test_outcome_exit_code(self):
        self.assertEqual(RunOutcome(Path('.'), {}, {'a': True}).exit_code, ExitCode.PASSED)
        failed = RunOutcome(Path('.'), {}, {'a': True, 'b': False})
        self.assertEqual(failed.failed_checks, ['b'])
        self.assertEqual(failed.exit_code, ExitCode.CHECK_FAILED)

    def test_json_safe(self):
        payload = {'a': math.inf, 'b': np.float64(1.5), 'c': (1, math.nan), 'd': np.bool_(True)}
        self.assertEqual(json_safe(payload), {'a': 'inf', 'b': 1.5, 'c': [1, 'nan'], 'd': True})


class ScenarioRunTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_baseline_writes_artifacts_and_passes(self):
        config = small_config()
        outcome = run_scenario(config, self.root)

        self.assertEqual(outcome.directory.name, f"Baseline-s3-{config.digest}")
        for name in (
            'config.env', 'constants.json', 'thresholds.json', 'errors.csv', 'primitive.csv',
            'reference.csv', 'summary.json', 'reference_v.csv', 'assimilated_w.csv',
        ):
            self.assertTrue((outcome.directory / name).exists(), name)
        self.assertFalse((outcome.directory / 'phi.csv').exists())

        self.assertEqual(
            set(outcome.checks), {'energy_budget', 'l2_convergence', 'int_bound', 'int_bound_control_fails'}
        )
        self.assertEqual(outcome.failed_checks, [])
        summary = json.loads((outcome.directory / 'summary.json').read_text())
        self.assertTrue(summary['passed'])
        self.assertEqual(summary['exit_code'], 0)
        self.assertIn('int_bound_control', summary['diagnostics'])
        self.assertFalse(summary['diagnostics']['int_bound_control']['passed'])

    def test_int_bound_control_that_holds_fails_the_run(self):
        # factor 1 reproduces the real bound, so the control cannot fail
        outcome = run_scenario(small_config(horizon=1.0, int_bound_control_factor=1.0), self.root)
        self.assertTrue(outcome.checks['int_bound'])
        self.assertEqual(outcome.failed_checks, ['int_bound_control_fails'])
        self.assertEqual(outcome.exit_code, ExitCode.CHECK_FAILED)

    def test_replay_is_bitwise(self):
        config = small_config(horizon=1.0)
        first = run_scenario(config, self.root / 'a')
        second = run_scenario(config, self.root / 'b')
        for name in ('errors.csv', 'reference.csv', 'assimilated_v.csv'):
            self.assertEqual((first.directory / name).read_bytes(), (second.directory / name).read_bytes())

        replayed = parse_config((first.directory / 'config.env').read_text())
        self.assertEqual(replayed.digest, config.digest)

    def test_seed_changes_the_run(self):
        config = small_config(spinup='none', horizon=0.5)
        first = run_scenario(config, self.root)
        second = run_scenario(config.with_values(seed=4), self.root)
        self.assertNotEqual(
            (first.directory / 'errors.csv').read_bytes(), (second.directory / 'errors.csv').read_bytes(),
        )

    def test_generalized_run_writes_phi(self):
        config = small_config(scenario=Scenario.GENERALIZED_DA, perturbation_amplitude=0.05, horizon=1.0)
        outcome = run_scenario(config, self.root)
        self.assertTrue((outcome.directory / 'phi.csv').exists())
        self.assertIn('l2_trend', outcome.checks)

    def test_blow_up_still_writes_summary(self):
        config = small_config(spinup='none', initial_l2=50.0)
        with self.assertRaises(CflViolationError):
            run_scenario(config, self.root)
        directory = self.root / f"Baseline-s3-{config.digest}"
        summary = json.loads((directory / 'summary.json').read_text())
        self.assertEqual(summary['exit_code'], 3)
        self.assertTrue((directory / 'config.env').exists())


class VerifyInterpolantTests(SimpleTestCase):
    def test_spectral_projection_within_bound(self):
        with tempfile.TemporaryDirectory() as directory:
            outcome = verify_interpolant(small_config(verify_samples=50), directory)
            self.assertTrue(outcome.directory.name.startswith('verify-spectral-'))
            self.assertTrue((outcome.directory / 'interpolant.json').exists())
            self.assertTrue(outcome.checks['spectral_bound'])


class DeterminingTests(SimpleTestCase):
    def config(self, **changes):
        values = {'scenario': Scenario.DETERMINING, 'spinup': 'none', 'horizon': 1.0, **changes}
        return small_config(**values)

    def test_identical_solutions_stay_identical(self):
        config = self.config(forcing_difference=0.0, determining_seed_offset=0)
        spec, _ = calibrate_interpolant(config, config.grid())
        report = run_determining_experiment(DeterminingSetup.from_config(config, spec))
        self.assertEqual(np.max(report.full), 0.0)
        self.assertEqual(np.max(report.observed), 0.0)
        self.assertTrue(all(report.checks.values()))

    def test_forcings_must_share_grashof_number(self):
        config = self.config()
        spec, _ = calibrate_interpolant(config, config.grid())
        setup = DeterminingSetup.from_config(config, spec)
        with self.assertRaises(InvalidParameterError):
            DeterminingSetup(
                params=setup.params, forcing1=setup.forcing1, forcing2=setup.forcing1.scaled(2.0),
                seed1=0, seed2=1, interpolant=spec, dt=0.01, horizon=1.0, sample_interval=0.02,
            )

    def test_auxiliary_gain(self):
        config = self.config()
        spec = InterpolantSpec(InterpolantKind.SPECTRAL_PROJECTION, 0.25, c1=0.5)
        setup = DeterminingSetup.from_config(config, spec)
        # (alpha - beta) = 1 / max(Re, Rm) = 0.5
        assert_allclose(auxiliary_gain(setup), 0.5 / (0.25 * 0.0625))

    def test_scenario_writes_determining_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            outcome = run_scenario(self.config(), directory)
            self.assertTrue((outcome.directory / 'determining.csv').exists())
            self.assertEqual(
                set(outcome.checks), {'observed_difference_decays', 'full_difference_decays'},
            )


class SweepTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.config = small_config(horizon=1.0)

    def test_single_value_sweep_matches_plain_run(self):
        plain = run_scenario(self.config, self.root / 'plain')
        outcome = run_sweep(self.config, SweepAxis.MU, [self.config['mu']], workers=1, output_dir=self.root / 'sweep')
        self.assertEqual(outcome.failures, 0)
        swept = Path(outcome.rows[0]['directory'])
        self.assertEqual((swept / 'errors.csv').read_bytes(), (plain.directory / 'errors.csv').read_bytes())
        self.assertTrue((outcome.directory / 'sweep.csv').exists())

    def test_rejected_value_is_recorded_and_skipped(self):
        outcome = run_sweep(self.config, SweepAxis.H, [0.25, 0.3], workers=1, output_dir=self.root)
        self.assertEqual(outcome.failures, 1)
        self.assertEqual(outcome.rows[0]['exit_code'], 0)
        self.assertEqual(outcome.rows[1]['exit_code'], ExitCode.INVALID_CONFIG)
        lines = (outcome.directory / 'sweep.csv').read_text().splitlines()
        self.assertEqual(len(lines), 3)

    def test_rejects_bad_values(self):
        for values in ([], [math.nan], [-1.0]):
            with self.subTest(values=values), self.assertRaises(InvalidParameterError):
                run_sweep(self.config, SweepAxis.MU, values, output_dir=self.root)
        with self.assertRaises(InvalidParameterError):
            run_sweep(self.config, 'Re', [1.0], output_dir=self.root)


class ExperimentServiceTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.service = ExperimentService(output_dir=self.tmp.name)

    def test_run_is_recorded(self):
        record, outcome = self.service.run(small_config(horizon=1.0))
        record.refresh_from_db()
        self.assertEqual(record.exit_code, 0)
        self.assertTrue(record.passed)
        self.assertEqual(record.action, RunAction.RUN)
        self.assertEqual(record.directory, str(outcome.directory))
        self.assertIsNotNone(record.runtime_seconds)

    def test_failed_check_is_recorded_and_raised(self):
        # 20 orders of magnitude is below round-off
        config = small_config(horizon=1.0, convergence_orders=20.0)
        with self.assertRaises(CheckFailure) as raised:
            self.service.run(config)
        self.assertEqual(raised.exception.failed_checks, ['l2_convergence'])
        record = ExperimentRun.objects.get()
        self.assertEqual(record.exit_code, ExitCode.CHECK_FAILED)
        self.assertFalse(record.summary['passed'])

    def test_blow_up_is_recorded(self):
        with self.assertRaises(CflViolationError):
            self.service.run(small_config(spinup='none', initial_l2=50.0))
        record = ExperimentRun.objects.get()
        self.assertEqual(record.exit_code, ExitCode.BLOW_UP)
        self.assertIn('CFL', record.error)

    def test_determining_action_forces_the_scenario(self):
        record, _ = self.service.determining(small_config(horizon=1.0, forcing_difference=0.0))
        self.assertEqual(record.scenario, Scenario.DETERMINING)
        self.assertEqual(record.action, RunAction.DETERMINING)

    def test_sweep_records_each_point(self):
        config = small_config(horizon=1.0)
        sweep, outcome = self.service.sweep(config, SweepAxis.H, [0.25, 0.3], workers=1)
        sweep = Sweep.objects.get(pk=sweep.pk)
        self.assertEqual(sweep.failures, 1)
        self.assertEqual(sweep.runs.count(), 2)
        failed = sweep.runs.get(sweep_value=0.3)
        self.assertEqual(failed.exit_code, ExitCode.INVALID_CONFIG)
        self.assertIn('1/h', failed.error)


class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write(self, text):
        path = self.root / 'experiment.env'
        path.write_text(text)
        return str(path)

    def test_invalid_config_exits_with_2(self):
        path = self.write(SMALL + "viscosity=1\n")
        with self.assertRaises(CommandError) as raised:
            call_command('run', path, '--output-dir', str(self.root))
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn('viscosity', str(raised.exception))

    def test_failed_check_exits_with_4(self):
        path = self.write(SMALL + "horizon=1\nconvergence_orders=20\n")
        with self.assertRaises(CommandError) as raised:
            call_command('run', path, '--output-dir', str(self.root))
        self.assertEqual(raised.exception.returncode, 4)

    def test_blow_up_exits_with_3(self):
        path = self.write(SMALL.replace('initial_l2=0.5', 'initial_l2=50') + "spinup=none\n")
        with self.assertRaises(CommandError) as raised:
            call_command('run', path, '--output-dir', str(self.root))
        self.assertEqual(raised.exception.returncode, 3)

    def test_seed_override_reaches_the_run_directory(self):
        path = self.write(SMALL + "horizon=1\n")
        call_command('run', path, '--seed', '7', '--output-dir', str(self.root), stdout=io.StringIO())
        record = ExperimentRun.objects.get()
        self.assertEqual(record.seed, 7)
        self.assertTrue(Path(record.directory).name.startswith('Baseline-s7-'))

    def test_sweep_values_must_parse(self):
        path = self.write(SMALL)
        with self.assertRaises(CommandError) as raised:
            call_command('sweep', path, '--axis', 'mu', '--values', '10,abc', '--output-dir', str(self.root))
        self.assertEqual(raised.exception.returncode, 2)


@unittest.skipUnless(SLOW_TESTS, 'set MHDNUDGE_SLOW_TESTS=1 to run the full scenario configs')
class AcceptanceTests(SimpleTestCase):
    """Every shipped config passes its checks at its stated resolution"""

    CONFIGS = Path(settings.BASE_DIR) / 'configs'

    def test_shipped_configs_pass(self):
        with tempfile.TemporaryDirectory() as directory:
            for path in sorted(self.CONFIGS.glob('*.env')):
                with self.subTest(config=path.name):
                    outcome = run_scenario(load_config(path), directory)
                    self.assertEqual(outcome.failed_checks, [])

    def test_interpolant_inequality_on_fresh_fields(self):
        with tempfile.TemporaryDirectory() as directory:
            for kind, h in (('spectral', 0.125), ('volume', 0.125), ('nodal', 0.0625)):
                config = parse_config(f"n=64\ninterpolant={kind}\nh={h}\nverify_samples=1000\n")
                with self.subTest(interpolant=kind):
                    outcome = verify_interpolant(config, directory)
                    self.assertTrue(outcome.checks['inequality_holds'])

    def test_mu_sweep_rate_grows_with_mu(self):
        config = load_config(self.CONFIGS / 'baseline.env').with_values(horizon=5.0)
        with tempfile.TemporaryDirectory() as directory:
            outcome = run_sweep(config, SweepAxis.MU, [10.0, 50.0], output_dir=directory)
        rates = [row['rate'] for row in outcome.rows]
        self.assertLess(rates[0], rates[1])
