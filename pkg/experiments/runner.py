"""Scenario execution: calibration, co-evolution, checks and run artifacts

Everything here is pure with respect to the database; ``services`` wraps it
with run records.
"""
import logging
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import django
import numpy as np
from django.conf import settings
from django.db import models

from core.exceptions import (
    CflViolationError, CheckFailure, ConfigurationError, DiagnosticError, DivergenceError,
    GridMismatchError, InterpolantError, InvalidParameterError, MhdNudgeError,
    NumericalInstabilityError, StiffnessError, ThresholdError,
)
from diagnostics.bounds import check_int_bound
from diagnostics.gronwall import gronwall_condition_check, psi_for_mask, psi_generalized
from diagnostics.series import convergence_verdict, decay_segment, onset_time, trend_decreasing
from diagnostics.thresholds import TheoremId, theorem_thresholds, theorems_for
from mhd.budget import absorbing_ball_report, energy_budget
from mhd.dynamics import DEFAULT_CFL_SAFETY, ElsasserState, imex_step
from mhd.forcing import Envelope, Perturbation, grashof_number
from nudging.assimilation import (
    AssimilationPair, NudgingConfig, RunSpec, build_reference_initial, coupled_step, run_assimilation,
)
from observation.interpolants import ObservationMask, interpolate_coefficients
from observation.verification import (
    DEFAULT_INFLATION, SPECTRAL_BOUND, check_interpolant_inequality, verify_type1_bound,
    verify_type2_bound,
)
from spectral.operators import random_divfree_field, squared_norm_coefficients
from spectral.snapshots import save_snapshot

from .artifacts import json_safe, run_directory, write_json, write_provenance, write_rows
from .config import parse_config
from .models import Scenario, SweepAxis

logger = logging.getLogger(__name__)

REGIME_NOTE = 'desk-scale regime chosen for this experiment; the analysis prescribes no setup'
NON_CONVERGENCE_RATIO = 1e-2
DETERMINING_DROP = 1e-3
SPECTRAL_TOLERANCE = 1e-6
DETERMINING_COLUMNS = ['t', 'observed_difference', 'full_difference', 'auxiliary_error']
SWEEP_COLUMNS = [
    'value', 'exit_code', 'rate', 'r_squared', 'terminal_ratio', 'converged',
    'theorem', 'mu_min', 'h_max', 'directory', 'error',
]


class ExitCode(models.IntegerChoices):
    PASSED = 0, 'All checks passed'
    UNEXPECTED = 1, 'Unexpected error'
    INVALID_CONFIG = 2, 'Invalid configuration'
    BLOW_UP = 3, 'Numerical blow-up'
    CHECK_FAILED = 4, 'A scenario check failed'


BLOW_UP_ERRORS = (NumericalInstabilityError, CflViolationError, StiffnessError)
CONFIG_ERRORS = (
    ConfigurationError, InvalidParameterError, GridMismatchError, DivergenceError,
    InterpolantError, ThresholdError, DiagnosticError,
)


def exit_code_for(error):
    if isinstance(error, BLOW_UP_ERRORS):
        return ExitCode.BLOW_UP
    if isinstance(error, CONFIG_ERRORS):
        return ExitCode.INVALID_CONFIG
    if isinstance(error, CheckFailure):
        return ExitCode.CHECK_FAILED
    return ExitCode.UNEXPECTED


@dataclass(frozen=True, eq=False)
class RunOutcome:
    directory: Path
    summary: dict
    checks: dict = field(default_factory=dict)

    @property
    def failed_checks(self):
        return [name for name, passed in self.checks.items() if not passed]

    @property
    def exit_code(self):
        return ExitCode.CHECK_FAILED if self.failed_checks else ExitCode.PASSED


# Calibration and thresholds

def _inflation():
    return getattr(settings, 'MHDNUDGE', {}).get('INFLATION', DEFAULT_INFLATION)


def calibrate_interpolant(config, grid):
    """Empirical interpolant constants; returns (spec carrying them, report)"""
    spec = config.interpolant()
    spec.check_grid(grid)
    verify = verify_type1_bound if spec.type_class == 1 else verify_type2_bound
    report = verify(spec, grid, n_samples=config['verify_samples'], seed=config.seed, inflation=_inflation())
    return report.apply_to(spec), report


def threshold_report(theorem_ids, G, params, constants, mu, h):
    entries = []
    for theorem_id in theorem_ids:
        thresholds = theorem_thresholds(theorem_id, G, params, constants, mu=mu)
        entries.append({**thresholds.as_dict(), 'h': h, 'admitted': thresholds.admits(mu, h)})
    return entries


# Checks

def decayed(times, values):
    """Decreasing trend over the tail half, or a collapse to round-off"""
    segment_t, _ = decay_segment(times, values)
    if len(segment_t) < len(times):
        return True
    return trend_decreasing(times, values)


def _verdict(times, values, orders, min_r_squared):
    if values[0] <= 0:
        return None
    return convergence_verdict(times, values, orders=orders, min_r_squared=min_r_squared)


def _gronwall(config, result, G, params, constants):
    trajectory = result.trajectory
    mu = config['mu']
    if result.config.perturbed and config['mask'] == ObservationMask.ALL:
        psi = psi_generalized(trajectory.enstrophy, mu, params, constants)
    else:
        psi = psi_for_mask(config['mask'], trajectory.enstrophy, mu, G, params, constants)
    if psi is None:
        return None
    try:
        return gronwall_condition_check(trajectory.times, psi, params.window).as_dict()
    except DiagnosticError as e:
        return {'error': str(e)}


def scenario_checks(config, result, G, params, constants):
    """(checks, diagnostics): pass/fail per named check, plus reported-only figures"""
    errors, trajectory = result.errors, result.trajectory
    times = errors.times
    orders, min_r_squared = config.required_orders, config['min_r_squared']
    scenario = config.scenario

    budget = energy_budget(trajectory)
    checks = {'energy_budget': budget.passed}
    verdicts = {
        'l2': _verdict(times, errors.l2_total, orders, min_r_squared),
        'h1': _verdict(times, errors.h1_total, orders, min_r_squared),
    }
    diagnostics = {
        'energy_budget': budget.as_dict(),
        'absorbing_ball': absorbing_ball_report(result.pair.reference, params, result.run_spec.forcing).as_dict(),
        'gronwall': _gronwall(config, result, G, params, constants),
    }

    def converged(name):
        verdict = verdicts[name]
        if verdict is None:
            # synchronized start: the error must stay at round-off
            values = errors.l2_total if name == 'l2' else errors.h1_total
            return bool(np.max(values) <= 1e-10)
        return verdict.converged

    if scenario in (Scenario.BASELINE, Scenario.H1_TRACK):
        checks['l2_convergence'] = converged('l2')
        report = check_int_bound(trajectory, G, params)
        control = check_int_bound(trajectory, G / config['int_bound_control_factor'], params)
        checks['int_bound'] = report.passed
        checks['int_bound_control_fails'] = not control.passed
        diagnostics['int_bound'] = report.as_dict()
        diagnostics['int_bound_control'] = {**control.as_dict(), 'factor': config['int_bound_control_factor']}
    if scenario == Scenario.H1_TRACK:
        checks['h1_convergence'] = converged('h1')
        l2_onset = onset_time(times, errors.l2_total)
        h1_onset = onset_time(times, errors.h1_total)
        diagnostics['onset'] = {'l2': l2_onset, 'h1': h1_onset}
        interval = config['sample_interval']
        checks['h1_onset'] = (
            l2_onset is not None and h1_onset is not None
            and h1_onset >= l2_onset - interval * (1 + 1e-9)
        )
    elif scenario == Scenario.TYPE2:
        checks['h1_convergence'] = converged('h1')
    elif scenario == Scenario.GENERALIZED_DA:
        checks['l2_trend'] = decayed(times, errors.l2_total)
        diagnostics['phi'] = {'initial': float(result.phi[0]), 'final': float(result.phi[-1])}
    elif scenario == Scenario.B_ONLY_CONTROL:
        ratio = errors.l2_u[-1] / errors.l2_u[0] if errors.l2_u[0] > 0 else 0.0
        diagnostics['velocity_terminal_ratio'] = float(ratio)
        checks['velocity_not_converged'] = bool(ratio > NON_CONVERGENCE_RATIO)
    elif scenario == Scenario.U_ONLY_EXPLORATORY:
        diagnostics['trend_decreasing'] = decayed(times, errors.l2_total)

    diagnostics['verdicts'] = {name: verdict.as_dict() if verdict else None for name, verdict in verdicts.items()}
    return checks, diagnostics


# Scenario runs

def write_run_files(directory, result):
    result.errors.write_csv(directory / 'errors.csv')
    result.errors.write_primitive_csv(directory / 'primitive.csv')
    result.trajectory.write_csv(directory / 'reference.csv')
    if result.config.perturbed:
        write_rows(directory / 'phi.csv', ['t', 'phi'], zip(result.errors.times, result.phi))
    pair = result.pair
    for name, item in (
        ('reference_v', pair.reference.v), ('reference_w', pair.reference.w),
        ('assimilated_v', pair.assimilated.v), ('assimilated_w', pair.assimilated.w),
    ):
        save_snapshot(directory / f"{name}.csv", item)


def _base_summary(config, G, params):
    return {
        'scenario': config.scenario,
        'seed': config.seed,
        'digest': config.digest,
        'regime': REGIME_NOTE,
        'G': G,
        'params': params.as_dict(),
    }


def _finish(directory, summary, checks, started):
    summary['checks'] = checks
    summary['passed'] = all(checks.values())
    summary['exit_code'] = int(ExitCode.PASSED if summary['passed'] else ExitCode.CHECK_FAILED)
    summary['runtime_seconds'] = time.perf_counter() - started
    write_json(directory / 'summary.json', summary)
    outcome = RunOutcome(directory, json_safe(summary), checks)
    if outcome.failed_checks:
        logger.warning(f"{summary['scenario']} run in {directory} failed: {', '.join(outcome.failed_checks)}")
    else:
        logger.info(f"{summary['scenario']} run in {directory} passed in {summary['runtime_seconds']:.1f}s")
    return outcome


def _record_failure(directory, summary, error):
    summary.update(error=str(error), exit_code=int(exit_code_for(error)))
    write_json(directory / 'summary.json', summary)


def run_scenario(config, output_dir=None):
    """Run one scenario end to end and write its run directory"""
    if config.scenario == Scenario.DETERMINING:
        return run_determining_scenario(config, output_dir)
    started = time.perf_counter()
    grid, params = config.grid(), config.params()
    forcing = config.forcing(grid, params)
    G = grashof_number(forcing, params)
    spec, report = calibrate_interpolant(config, grid)
    constants = config.constants().with_interpolant(report)
    theorems = threshold_report(theorems_for(config['mask'], spec.type_class), G, params, constants, config['mu'], spec.h)

    directory = run_directory(config, output_dir)
    write_provenance(directory, config, constants, {'G': G, 'interpolant': report.as_dict(), 'theorems': theorems})
    summary = _base_summary(config, G, params)
    summary['theorems'] = theorems

    nudging = config.nudging_config(grid, spec)
    summary['nudging'] = nudging.as_dict()
    try:
        result = run_assimilation(nudging, config.run_spec(params, forcing))
    except MhdNudgeError as e:
        logger.error(f"{config.scenario} run in {directory} failed: {e}")
        _record_failure(directory, summary, e)
        raise

    write_run_files(directory, result)
    checks, diagnostics = scenario_checks(config, result, G, params, constants)
    primary = 'h1' if config.scenario == Scenario.TYPE2 else 'l2'
    summary.update(
        spin_up=result.spin_up.as_dict(),
        samples=len(result.errors),
        initial_error={'l2': result.errors.l2_total[0], 'h1': result.errors.h1_total[0]},
        terminal_error={'l2': result.errors.l2_total[-1], 'h1': result.errors.h1_total[-1]},
        primary_verdict=diagnostics['verdicts'][primary],
        diagnostics=diagnostics,
    )
    return _finish(directory, summary, checks, started)


# Determining interpolant experiment

@dataclass(frozen=True, eq=False)
class DeterminingSetup:
    """Two solutions with forcings of equal Grashof number and a shared interpolant"""

    params: object
    forcing1: object
    forcing2: object
    seed1: int
    seed2: int
    interpolant: object
    dt: float
    horizon: float
    sample_interval: float
    initial_l2: float = 1.0
    initial_k_max: int = None
    cfl_safety: float = DEFAULT_CFL_SAFETY

    def __post_init__(self):
        self.forcing1.grid.check_same(self.forcing2.grid)
        G1 = grashof_number(self.forcing1, self.params)
        G2 = grashof_number(self.forcing2, self.params)
        if not math.isclose(G1, G2, rel_tol=1e-12, abs_tol=1e-300):
            raise InvalidParameterError(f"forcings have different Grashof numbers ({G1:.6g} vs {G2:.6g})")
        if self.interpolant.type_class != 1:
            raise InterpolantError("the determining experiment needs a type-1 interpolant")

    @property
    def grid(self):
        return self.forcing1.grid

    @property
    def G(self):
        return grashof_number(self.forcing1, self.params)

    def run_spec(self, seed):
        return RunSpec(
            params=self.params, forcing=self.forcing1, dt=self.dt, horizon=self.horizon,
            sample_interval=self.sample_interval, seed=seed, initial_l2=self.initial_l2,
            initial_k_max=self.initial_k_max, cfl_safety=self.cfl_safety,
        )

    @classmethod
    def from_config(cls, config, interpolant):
        """Second forcing = first plus transients of l2 size forcing_difference decaying in time"""
        grid, params = config.grid(), config.params()
        forcing1 = config.forcing(grid, params)
        forcing2 = forcing1
        amplitude = config['forcing_difference']
        if amplitude > 0:
            envelope = Envelope.decaying(config['forcing_difference_decay'])
            k_max = min(3, grid.dealias_cutoff)
            first, second = np.random.SeedSequence([config.seed, 2]).spawn(2)
            forcing2 = forcing1.with_transients(
                Perturbation(random_divfree_field(grid, first, k_max=k_max, l2=amplitude), envelope),
                Perturbation(random_divfree_field(grid, second, k_max=k_max, l2=amplitude), envelope),
            )
        return cls(
            params=params, forcing1=forcing1, forcing2=forcing2,
            seed1=config.seed, seed2=config.seed + config['determining_seed_offset'],
            interpolant=interpolant, dt=config['dt'], horizon=config['horizon'],
            sample_interval=config['sample_interval'], initial_l2=config['initial_l2'],
            initial_k_max=config['initial_k_max'], cfl_safety=config.cfl_safety,
        )


@dataclass(frozen=True, eq=False)
class DeterminingReport:
    times: np.ndarray
    observed: np.ndarray
    full: np.ndarray
    auxiliary: np.ndarray
    mu: float

    @property
    def observed_decays(self):
        return decayed(self.times, self.observed)

    @property
    def full_decays(self):
        peak = float(np.max(self.full))
        return decayed(self.times, self.full) and self.full[-1] <= DETERMINING_DROP * peak

    @property
    def checks(self):
        return {
            'observed_difference_decays': self.observed_decays,
            'full_difference_decays': self.full_decays,
        }

    def write_csv(self, path):
        write_rows(path, DETERMINING_COLUMNS, zip(self.times, self.observed, self.full, self.auxiliary))

    def as_dict(self):
        return {
            'mu': self.mu,
            'samples': len(self.times),
            'peak_full_difference': float(np.max(self.full)),
            'terminal_full_difference': float(self.full[-1]),
            'terminal_observed_difference': float(self.observed[-1]),
            'terminal_auxiliary_error': float(self.auxiliary[-1]),
            'auxiliary_decays': decayed(self.times, self.auxiliary),
        }


def auxiliary_gain(setup):
    """mu = (alpha - beta) / (c1^2 h^2)"""
    spec = setup.interpolant
    if not spec.c1:
        raise InterpolantError("the auxiliary gain needs a calibrated c1")
    return setup.params.alpha_minus_beta / (spec.c1 ** 2 * spec.h ** 2)


def run_determining_experiment(setup):
    """Evolve both solutions and the auxiliary solution nudged toward the first one

    The auxiliary system carries the transient forcing difference as its
    forcing perturbation, so it runs the second solution's forcing.
    """
    grid, params, dt = setup.grid, setup.params, setup.dt
    mu = auxiliary_gain(setup)
    nudging = NudgingConfig(
        mu=mu, interpolant=setup.interpolant,
        delta1=setup.forcing2.transient_f, delta2=setup.forcing2.transient_g,
    )
    first = build_reference_initial(setup.run_spec(setup.seed1))
    second = build_reference_initial(setup.run_spec(setup.seed2))
    pair = AssimilationPair(first, ElsasserState.zeros(grid))

    rows = []

    def sample():
        dv = pair.reference.v.coefficients - second.v.coefficients
        dw = pair.reference.w.coefficients - second.w.coefficients
        observed = (
            squared_norm_coefficients(interpolate_coefficients(setup.interpolant, dv, grid), grid)
            + squared_norm_coefficients(interpolate_coefficients(setup.interpolant, dw, grid), grid)
        )
        full = squared_norm_coefficients(dv, grid) + squared_norm_coefficients(dw, grid)
        errors = pair.errors(params.swapped)
        rows.append((pair.t, math.sqrt(observed), math.sqrt(full), math.hypot(errors.l2_eta, errors.l2_zeta)))

    sample()
    steps = int(round(setup.horizon / dt))
    every = int(round(setup.sample_interval / dt))
    for step in range(1, steps + 1):
        second = imex_step(second, params, setup.forcing2, dt, cfl_safety=setup.cfl_safety)
        pair = coupled_step(pair, params, setup.forcing1, nudging, dt, setup.cfl_safety)
        if not (second.is_finite() and pair.reference.is_finite() and pair.assimilated.is_finite()):
            logger.error(f"Determining experiment blew up at step {step}")
            raise NumericalInstabilityError(
                step, pair.t, {'mu': mu, 'dt': dt, 'h': setup.interpolant.h, 'Re': params.Re, 'Rm': params.Rm},
            )
        if step % every == 0:
            sample()

    times, observed, full, auxiliary = (np.array(column) for column in zip(*rows))
    report = DeterminingReport(times, observed, full, auxiliary, mu)
    logger.info(
        f"Determining experiment finished: full difference {full[0]:.3e} -> {full[-1]:.3e}, "
        f"observed {observed[0]:.3e} -> {observed[-1]:.3e}"
    )
    return report


def run_determining_scenario(config, output_dir=None):
    started = time.perf_counter()
    grid, params = config.grid(), config.params()
    spec, calibration = calibrate_interpolant(config, grid)
    constants = config.constants().with_interpolant(calibration)
    setup = DeterminingSetup.from_config(config, spec)
    mu = auxiliary_gain(setup)
    theorems = threshold_report([TheoremId.DET_INTERP], setup.G, params, constants, mu, spec.h)

    directory = run_directory(config, output_dir)
    write_provenance(
        directory, config, constants, {'G': setup.G, 'interpolant': calibration.as_dict(), 'theorems': theorems},
    )
    summary = _base_summary(config, setup.G, params)
    summary.update(theorems=theorems, seeds=[setup.seed1, setup.seed2])
    try:
        report = run_determining_experiment(setup)
    except MhdNudgeError as e:
        logger.error(f"Determining run in {directory} failed: {e}")
        _record_failure(directory, summary, e)
        raise
    report.write_csv(directory / 'determining.csv')
    summary['determining'] = report.as_dict()
    return _finish(directory, summary, report.checks, started)


# Interpolant verification

def verify_interpolant(config, output_dir=None):
    """Estimate the interpolant constants and test them on fresh fields"""
    started = time.perf_counter()
    grid = config.grid()
    spec, report = calibrate_interpolant(config, grid)
    inequality = check_interpolant_inequality(spec, grid, n_samples=config['verify_samples'], seed=config.seed + 1)
    constants = config.constants().with_interpolant(report)

    directory = run_directory(config, output_dir, prefix=f"verify-{spec.kind}")
    write_provenance(directory, config, constants)
    write_json(directory / 'interpolant.json', {'report': report.as_dict(), 'inequality': inequality.as_dict()})

    checks = {'inequality_holds': inequality.passed}
    if spec.is_spectral:
        checks['spectral_bound'] = report.raw[0] <= SPECTRAL_BOUND + SPECTRAL_TOLERANCE
    summary = {
        'scenario': 'VerifyInterpolant', 'seed': config.seed, 'digest': config.digest,
        'interpolant': report.as_dict(), 'raw': list(report.raw), 'inequality': inequality.as_dict(),
    }
    return _finish(directory, summary, checks, started)


# Sweeps

def sweep_point_config(config, axis, value):
    if axis == SweepAxis.MU:
        return config.with_values(mu=float(value))
    if axis == SweepAxis.H:
        return config.with_values(h=float(value))
    if axis == SweepAxis.G:
        return config.scaled_to_grashof(float(value))
    raise InvalidParameterError(f"unknown sweep axis {axis!r}")


def check_sweep_values(axis, values):
    if not values:
        raise InvalidParameterError("a sweep needs at least one value")
    for value in values:
        if not math.isfinite(value) or value < 0 or (axis == SweepAxis.H and value == 0):
            raise InvalidParameterError(f"sweep value {value} must be finite and positive")


def _init_worker():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'nudgeproject.settings')
    django.setup()


def _failure_row(error):
    return {'exit_code': int(exit_code_for(error)), 'error': str(error)}


def _sweep_point(payload):
    text, output_dir = payload
    try:
        outcome = run_scenario(parse_config(text), output_dir)
    except Exception as e:
        logger.error(f"Sweep point failed: {e}")
        return {**_failure_row(e), 'config_text': text}
    summary = outcome.summary
    verdict = summary.get('primary_verdict') or {}
    theorem = (summary.get('theorems') or [{}])[0]
    return {
        'exit_code': int(outcome.exit_code),
        'rate': verdict.get('rate'),
        'r_squared': verdict.get('r_squared'),
        'terminal_ratio': verdict.get('terminal_ratio'),
        'converged': verdict.get('converged'),
        'theorem': theorem.get('theorem_id'),
        'mu_min': theorem.get('mu_min'),
        'h_max': theorem.get('h_max'),
        'directory': str(outcome.directory),
        'summary': summary,
        'config_text': text,
    }


@dataclass(frozen=True, eq=False)
class SweepOutcome:
    directory: Path
    axis: str
    rows: list

    @property
    def failures(self):
        return sum(1 for row in self.rows if row.get('error'))


def run_sweep(config, axis, values, workers=None, output_dir=None):
    """One run per value, in parallel over runs; failed points are recorded and skipped"""
    if axis not in SweepAxis.values:
        raise InvalidParameterError(f"unknown sweep axis {axis!r}")
    values = [float(value) for value in values]
    check_sweep_values(axis, values)
    root = Path(output_dir) if output_dir else config.output_dir
    directory = root / f"sweep-{axis}-s{config.seed}-{config.digest}"
    directory.mkdir(parents=True, exist_ok=True)
    (directory / 'config.env').write_text(config.text)

    results = [None] * len(values)
    payloads = []
    for index, value in enumerate(values):
        try:
            point = sweep_point_config(config, axis, value)
        except MhdNudgeError as e:
            logger.error(f"Sweep value {axis}={value} rejected: {e}")
            results[index] = _failure_row(e)
            continue
        payloads.append((index, (point.text, str(directory))))

    workers = workers or getattr(settings, 'MHDNUDGE', {}).get('SWEEP_WORKERS', 1)
    if workers > 1 and len(payloads) > 1:
        with Pool(min(workers, len(payloads)), initializer=_init_worker) as pool:
            computed = pool.map(_sweep_point, [payload for _, payload in payloads])
    else:
        computed = [_sweep_point(payload) for _, payload in payloads]
    for (index, _), row in zip(payloads, computed):
        results[index] = row

    rows = [{'value': value, **row} for value, row in zip(values, results)]
    write_rows(directory / 'sweep.csv', SWEEP_COLUMNS, ([row.get(name) for name in SWEEP_COLUMNS] for row in rows))
    outcome = SweepOutcome(directory, axis, rows)
    logger.info(f"Sweep over {axis} finished: {len(rows)} points, {outcome.failures} failed")
    return outcome
