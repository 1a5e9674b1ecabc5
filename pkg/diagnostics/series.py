"""Synchronization error series and exponential-rate fitting"""
import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import linregress

from core.exceptions import DiagnosticError
from spectral.operators import squared_norm_coefficients

logger = logging.getLogger(__name__)

ERROR_COLUMNS = ['t', 'l2_eta', 'l2_zeta', 'h1_eta', 'h1_zeta']
PRIMITIVE_COLUMNS = ['t', 'l2_u', 'l2_b']
LOG_FLOOR = 1e-14
ROUNDOFF_FLOOR = 1e-13
MIN_FIT_SAMPLES = 10
CLOCK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ErrorSample:
    t: float
    l2_eta: float
    l2_zeta: float
    h1_eta: float
    h1_zeta: float
    l2_u: float = 0.0
    l2_b: float = 0.0


def error_norms(reference, assimilated, swapped=False):
    """L2 and H1 norms of eta = v - v~ and zeta = w - w~ (and of the u, b errors)"""
    reference.grid.check_same(assimilated.grid)
    if abs(reference.t - assimilated.t) > CLOCK_TOLERANCE * max(1.0, abs(reference.t)):
        raise DiagnosticError(f"clock mismatch: reference t={reference.t}, assimilated t={assimilated.t}")
    grid = reference.grid
    eta = reference.v.coefficients - assimilated.v.coefficients
    zeta = reference.w.coefficients - assimilated.w.coefficients
    velocity = (eta - zeta) / 2 if swapped else (eta + zeta) / 2
    magnetic = (eta + zeta) / 2 if swapped else (eta - zeta) / 2
    return ErrorSample(
        t=reference.t,
        l2_eta=math.sqrt(squared_norm_coefficients(eta, grid)),
        l2_zeta=math.sqrt(squared_norm_coefficients(zeta, grid)),
        h1_eta=math.sqrt(squared_norm_coefficients(eta, grid, order=1)),
        h1_zeta=math.sqrt(squared_norm_coefficients(zeta, grid, order=1)),
        l2_u=math.sqrt(squared_norm_coefficients(velocity, grid)),
        l2_b=math.sqrt(squared_norm_coefficients(magnetic, grid)),
    )


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    times: np.ndarray
    l2_eta: np.ndarray
    l2_zeta: np.ndarray
    h1_eta: np.ndarray
    h1_zeta: np.ndarray
    l2_u: np.ndarray = None
    l2_b: np.ndarray = None
    fitted_rates: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size and np.any(np.diff(times) <= 0):
            raise DiagnosticError("error series times must be strictly increasing")
        for name in ('l2_eta', 'l2_zeta', 'h1_eta', 'h1_zeta', 'l2_u', 'l2_b'):
            values = getattr(self, name)
            if values is None:
                continue
            values = np.asarray(values, dtype=float)
            if values.shape != times.shape:
                raise DiagnosticError(f"{name} has {values.size} samples, times has {times.size}")
            if np.any(values < 0):
                raise DiagnosticError(f"{name} holds negative norms")
            object.__setattr__(self, name, values)
        object.__setattr__(self, 'times', times)

    @classmethod
    def from_samples(cls, samples):
        columns = {name: np.array([getattr(sample, name) for sample in samples], dtype=float)
                   for name in ('t', 'l2_eta', 'l2_zeta', 'h1_eta', 'h1_zeta', 'l2_u', 'l2_b')}
        times = columns.pop('t')
        return cls(times, **columns)

    def __len__(self):
        return len(self.times)

    @property
    def l2_total(self):
        return np.hypot(self.l2_eta, self.l2_zeta)

    @property
    def h1_total(self):
        return np.hypot(self.h1_eta, self.h1_zeta)

    def with_rates(self, **rates):
        return replace(self, fitted_rates={**self.fitted_rates, **rates})

    def write_csv(self, path):
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(ERROR_COLUMNS)
            for row in zip(self.times, self.l2_eta, self.l2_zeta, self.h1_eta, self.h1_zeta):
                writer.writerow([repr(float(value)) for value in row])

    def write_primitive_csv(self, path):
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(PRIMITIVE_COLUMNS)
            for row in zip(self.times, self.l2_u, self.l2_b):
                writer.writerow([repr(float(value)) for value in row])


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    intercept: float
    n_samples: int

    def as_dict(self):
        return {
            'rate': self.rate, 'r_squared': self.r_squared,
            'intercept': self.intercept, 'n_samples': self.n_samples,
        }


def fit_exponential_rate(times, values, window=0.5):
    """Fit ln(value) = intercept - rate * t over the trailing ``window`` fraction"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if not 0 < window <= 1:
        raise DiagnosticError(f"window must lie in (0, 1], got {window}")
    count = int(math.ceil(window * len(times)))
    if count < MIN_FIT_SAMPLES:
        raise DiagnosticError(f"rate fit needs {MIN_FIT_SAMPLES} samples in the window, got {count}")
    t = times[-count:]
    if t[-1] - t[0] <= 0:
        raise DiagnosticError("rate fit window spans no time")
    logs = np.log(np.maximum(values[-count:], LOG_FLOOR))
    fit = linregress(t, logs)
    # a constant series is fitted exactly but has no correlation coefficient
    r_squared = 1.0 if np.ptp(logs) == 0 else float(fit.rvalue ** 2)
    return RateFit(rate=-float(fit.slope), r_squared=r_squared, intercept=float(fit.intercept), n_samples=count)


def decay_segment(times, values, floor=ROUNDOFF_FLOOR):
    """Samples up to the first one at or below floor * initial"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values[0] <= 0:
        return times, values
    below = np.flatnonzero(values <= floor * values[0])
    if below.size == 0:
        return times, values
    end = below[0] + 1
    return times[:end], values[:end]


def onset_time(times, values, drop=1e-2):
    """First time a norm is at or below drop * initial, or None"""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values[0] <= 0:
        return None
    below = np.flatnonzero(values <= drop * values[0])
    return float(np.asarray(times)[below[0]]) if below.size else None


def trend_decreasing(times, values):
    """Negative log-linear slope over the tail half"""
    values = np.asarray(values, dtype=float)
    if np.all(values <= LOG_FLOOR):
        return True
    return fit_exponential_rate(times, values, window=0.5).rate > 0


@dataclass(frozen=True)
class ConvergenceVerdict:
    rate: float
    r_squared: float
    terminal_ratio: float
    orders: float
    converged: bool

    def as_dict(self):
        return {
            'rate': self.rate, 'r_squared': self.r_squared, 'terminal_ratio': self.terminal_ratio,
            'required_orders': self.orders, 'converged': self.converged,
        }


def convergence_verdict(times, values, orders=6, min_r_squared=0.98, window=0.5):
    """Rate > 0 with R^2 >= min_r_squared over the decay segment and 10^-orders terminal drop"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values[0] <= 0:
        raise DiagnosticError("convergence needs a positive initial error")
    terminal_ratio = float(values[-1] / values[0])
    segment_t, segment_v = decay_segment(times, values)
    if len(segment_t) < 2 * MIN_FIT_SAMPLES:
        # fast collapse to round-off: fit the whole decay, padded to MIN_FIT_SAMPLES
        count = min(len(times), max(len(segment_t), MIN_FIT_SAMPLES))
        segment_t, segment_v = times[:count], values[:count]
        window = 1.0
    fit = fit_exponential_rate(segment_t, segment_v, window)
    converged = fit.rate > 0 and fit.r_squared >= min_r_squared and terminal_ratio <= 10.0 ** (-orders)
    return ConvergenceVerdict(fit.rate, fit.r_squared, terminal_ratio, orders, converged)
