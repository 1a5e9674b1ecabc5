"""A-priori bound on the time-integrated enstrophy of the reference"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from core.exceptions import DiagnosticError

logger = logging.getLogger(__name__)

MIN_WINDOW_SAMPLES = 8
BOUND_FLOOR = 1e-10


@dataclass(frozen=True)
class IntBoundReport:
    window: float
    bound: float
    worst_integral: float
    worst_start: float
    n_windows: int

    @property
    def margin(self):
        return self.bound - self.worst_integral

    @property
    def passed(self):
        return self.worst_integral <= self.bound + BOUND_FLOOR

    def as_dict(self):
        return {
            'window': self.window, 'bound': self.bound,
            'worst_integral': self.worst_integral, 'worst_start': self.worst_start,
            'margin': self.margin, 'n_windows': self.n_windows, 'passed': self.passed,
        }


def int_bound(G, params, T):
    """(1 + T pi^2 (alpha - beta)) (alpha - beta) G^2"""
    gap = params.alpha_minus_beta
    return (1.0 + T * np.pi ** 2 * gap) * gap * G ** 2


def check_int_bound(trajectory, G, params, T=None):
    """Check int_t^{t+T} (|grad v|^2 + |grad w|^2) against the bound for every window start"""
    T = params.window if T is None else T
    times = np.asarray(trajectory.times, dtype=float)
    if len(times) < 2:
        raise DiagnosticError("int-bound check needs a sampled trajectory")
    step = (times[-1] - times[0]) / (len(times) - 1)
    width = int(round(T / step))
    if width + 1 < MIN_WINDOW_SAMPLES:
        raise DiagnosticError(
            f"int-bound check needs {MIN_WINDOW_SAMPLES} samples per window, got {width + 1}"
        )
    if width >= len(times):
        raise DiagnosticError(f"trajectory spans less than one window T={T:.4g}")
    running = cumulative_trapezoid(trajectory.enstrophy, times, initial=0.0)
    integrals = running[width:] - running[:-width]
    worst = int(np.argmax(integrals))
    report = IntBoundReport(
        window=float(T),
        bound=float(int_bound(G, params, T)),
        worst_integral=float(integrals[worst]),
        worst_start=float(times[worst]),
        n_windows=len(integrals),
    )
    if not report.passed:
        logger.warning(
            f"Enstrophy integral {report.worst_integral:.6g} at t={report.worst_start:.4g} "
            f"exceeds the bound {report.bound:.6g}"
        )
    return report
