"""Reference trajectories, the discrete energy budget and spin-up"""
import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.db import models
from scipy.integrate import trapezoid

from core.exceptions import DiagnosticError, InvalidParameterError, NumericalInstabilityError
from spectral.operators import squared_norm_coefficients

from .dynamics import DEFAULT_CFL_SAFETY, energy_rate, imex_step

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['t', 'l2_v', 'l2_w', 'h1_v', 'h1_w', 'energy_residual']
SETTLE_TOLERANCE = 0.01


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled norms of a reference solution"""

    times: np.ndarray
    l2_v: np.ndarray
    l2_w: np.ndarray
    h1_v: np.ndarray
    h1_w: np.ndarray
    energy_rate: np.ndarray
    forcing_squared: np.ndarray
    alpha_minus_beta: float

    def __len__(self):
        return len(self.times)

    @property
    def energy(self):
        return self.l2_v ** 2 + self.l2_w ** 2

    @property
    def enstrophy(self):
        return self.h1_v ** 2 + self.h1_w ** 2

    def residuals(self):
        return energy_residuals(self)

    def write_csv(self, path):
        residuals = self.residuals()
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(TRAJECTORY_COLUMNS)
            for row in zip(self.times, self.l2_v, self.l2_w, self.h1_v, self.h1_w, residuals):
                writer.writerow([repr(float(value)) for value in row])


class TrajectoryRecorder:
    """Collects trajectory samples from states as they are produced"""

    def __init__(self, params, forcing):
        self.params = params
        self.forcing = forcing
        self._rows = []

    def record(self, state):
        grid = state.grid
        v, w = state.v.coefficients, state.w.coefficients
        self._rows.append((
            state.t,
            math.sqrt(squared_norm_coefficients(v, grid)),
            math.sqrt(squared_norm_coefficients(w, grid)),
            math.sqrt(squared_norm_coefficients(v, grid, order=1)),
            math.sqrt(squared_norm_coefficients(w, grid, order=1)),
            energy_rate(state, self.params, self.forcing),
            self.forcing.squared_norm_at(state.t),
        ))

    def __len__(self):
        return len(self._rows)

    def trajectory(self):
        columns = np.array(self._rows, dtype=float).reshape(-1, 7).T
        return Trajectory(*columns, alpha_minus_beta=self.params.alpha_minus_beta)


def energy_rates(trajectory):
    """d/dt E from the sampled energies

    Interior samples use central differences. The one-sided difference at the
    two ends cannot resolve stiff modes, so those samples keep the recorded
    instantaneous rate.
    """
    rates = np.array(trajectory.energy_rate, dtype=float)
    rates[1:-1] = np.gradient(trajectory.energy, trajectory.times)[1:-1]
    return rates


def difference_allowances(trajectory):
    """Bound on the central-difference overshoot of d/dt E per sample

    Only concave stretches can overstate the growth of E; there the bound is
    (2 E(t) - E(t - h) - E(t + h)) / 2h.
    """
    allowances = np.zeros(len(trajectory))
    steps = np.diff(trajectory.times)
    allowances[1:-1] = np.maximum(0.0, -np.diff(trajectory.energy, 2)) / (2.0 * steps[1:])
    return allowances


def energy_residuals(trajectory):
    """d/dt E + (alpha - beta) Z - (|f|^2 + |g|^2) / (4 pi^2 (alpha - beta)) per sample"""
    gap = trajectory.alpha_minus_beta
    return (
        energy_rates(trajectory)
        + gap * trajectory.enstrophy
        - trajectory.forcing_squared / (4.0 * math.pi ** 2 * gap)
    )


@dataclass(frozen=True, eq=False)
class EnergyBudget:
    residuals: np.ndarray
    tolerances: np.ndarray
    rate_mismatch: float = 0.0

    @property
    def violations(self):
        return np.flatnonzero(self.residuals > self.tolerances)

    @property
    def passed(self):
        return self.violations.size == 0

    @property
    def worst(self):
        return float(np.max(self.residuals - self.tolerances))

    def as_dict(self):
        return {
            'passed': self.passed,
            'violations': int(self.violations.size),
            'max_residual': float(np.max(self.residuals)),
            'worst_excess': self.worst,
            'max_rate_mismatch': self.rate_mismatch,
        }


def energy_budget(trajectory):
    """Check the energy inequality along a sampled trajectory

    Interior tolerances widen by the difference allowance of each sample.
    """
    if len(trajectory) < 3:
        raise DiagnosticError(f"energy budget needs at least 3 samples, got {len(trajectory)}")
    steps = np.diff(trajectory.times)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise DiagnosticError("energy budget needs a uniformly sampled trajectory")
    tolerances = 1e-6 * np.maximum(1.0, trajectory.forcing_squared) + difference_allowances(trajectory)
    mismatch = float(np.max(np.abs(energy_rates(trajectory) - trajectory.energy_rate)))
    budget = EnergyBudget(energy_residuals(trajectory), tolerances, mismatch)
    if not budget.passed:
        logger.warning(
            f"Energy budget violated at {budget.violations.size} of {len(trajectory)} samples "
            f"(worst excess {budget.worst:.3e})"
        )
    return budget


class SpinUpMode(models.TextChoices):
    SETTLE = 'settle', 'Until the enstrophy average settles'
    FIXED = 'fixed', 'Fixed duration'
    NONE = 'none', 'No spin-up'


@dataclass(frozen=True)
class SpinUpPolicy:
    mode: str = SpinUpMode.SETTLE
    max_time: float = 50.0
    fixed_time: float = 0.0
    tolerance: float = SETTLE_TOLERANCE

    def __post_init__(self):
        if self.mode not in SpinUpMode.values:
            raise InvalidParameterError(f"unknown spin-up mode {self.mode!r}")
        if self.max_time < 0 or self.fixed_time < 0:
            raise InvalidParameterError("spin-up times must be >= 0")


@dataclass(frozen=True)
class SpinUpReport:
    mode: str
    duration: float
    windows: int
    settled: bool
    last_average: float

    def as_dict(self):
        return {
            'mode': self.mode, 'duration': self.duration, 'windows': self.windows,
            'settled': self.settled, 'last_enstrophy_average': self.last_average,
        }


def _enstrophy(state):
    grid = state.grid
    return (
        squared_norm_coefficients(state.v.coefficients, grid, order=1)
        + squared_norm_coefficients(state.w.coefficients, grid, order=1)
    )


def _advance(state, params, forcing, dt, steps, cfl_safety, samples=None):
    for step in range(1, steps + 1):
        state = imex_step(state, params, forcing, dt, cfl_safety=cfl_safety)
        if not state.is_finite():
            logger.error(f"Spin-up produced a non-finite state at t={state.t:.6g}")
            raise NumericalInstabilityError(step, state.t, {'phase': 'spin-up', 'dt': dt})
        if samples is not None:
            samples.append(_enstrophy(state))
    return state


def spin_up(state, params, forcing, dt, policy=None, cfl_safety=DEFAULT_CFL_SAFETY):
    """Integrate the reference until it sits on its attractor, then reset t to 0

    ``settle`` compares time averages of the enstrophy over consecutive
    windows of length 1 / (pi^2 (alpha - beta)).
    """
    policy = policy or SpinUpPolicy()
    if policy.mode == SpinUpMode.NONE:
        return state.restart_clock(), SpinUpReport(policy.mode, 0.0, 0, True, _enstrophy(state))

    start = state.t
    if policy.mode == SpinUpMode.FIXED:
        steps = int(round(policy.fixed_time / dt))
        state = _advance(state, params, forcing, dt, steps, cfl_safety)
        report = SpinUpReport(policy.mode, state.t - start, 0, True, _enstrophy(state))
        logger.info(f"Fixed spin-up finished after {report.duration:.4g} time units")
        return state.restart_clock(), report

    window_steps = max(1, int(round(params.window / dt)))
    max_windows = max(2, int(math.ceil(policy.max_time / (window_steps * dt))))
    previous = None
    average = _enstrophy(state)
    settled = False
    windows = 0
    while windows < max_windows:
        samples = [_enstrophy(state)]
        state = _advance(state, params, forcing, dt, window_steps, cfl_safety, samples)
        average = trapezoid(samples, dx=dt) / (window_steps * dt)
        windows += 1
        if previous is not None:
            both_tiny = max(average, previous) < 1e-12
            if both_tiny or abs(average - previous) <= policy.tolerance * max(average, previous):
                settled = True
                break
        previous = average

    report = SpinUpReport(policy.mode, state.t - start, windows, settled, float(average))
    if settled:
        logger.info(f"Spin-up settled after {windows} windows ({report.duration:.4g} time units)")
    else:
        logger.warning(
            f"Spin-up did not settle within {policy.max_time:.4g} time units; "
            f"last enstrophy average {average:.6g}"
        )
    return state.restart_clock(), report


@dataclass(frozen=True)
class AbsorbingBallReport:
    energy: float
    bound: float

    @property
    def inside(self):
        return self.energy <= self.bound * (1 + 1e-12)

    def as_dict(self):
        return {'energy': self.energy, 'bound': self.bound, 'inside': self.inside}


def absorbing_ball_report(state, params, forcing):
    """|v|^2 + |w|^2 against limsup(|f|^2 + |g|^2) / (2 pi^4 (alpha - beta)^2)"""
    grid = state.grid
    energy = (
        squared_norm_coefficients(state.v.coefficients, grid)
        + squared_norm_coefficients(state.w.coefficients, grid)
    )
    bound = forcing.limsup_squared_norm() / (2.0 * math.pi ** 4 * params.alpha_minus_beta ** 2)
    return AbsorbingBallReport(energy, bound)
