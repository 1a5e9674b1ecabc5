"""Windowed checks of the generalized Gronwall conditions

For Y' + psi Y <= phi the decay argument needs
liminf (1/T) int_t^{t+T} psi > 0 and limsup (1/T) int_t^{t+T} psi^- < inf.
Along a finite run both are approximated by sliding-window averages.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from core.exceptions import DiagnosticError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GronwallReport:
    window: float
    n_windows: int
    min_average: float
    max_negative_average: float

    @property
    def liminf_positive(self):
        return self.min_average > 0

    @property
    def limsup_finite(self):
        return math.isfinite(self.max_negative_average)

    @property
    def holds(self):
        return self.liminf_positive and self.limsup_finite

    def as_dict(self):
        return {
            'window': self.window, 'n_windows': self.n_windows,
            'min_window_average': self.min_average,
            'max_negative_part_average': self.max_negative_average,
            'holds': self.holds,
        }


def window_averages(times, values, T):
    """Trapezoidal averages of ``values`` over every window of ~T samples"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    step = (times[-1] - times[0]) / (len(times) - 1)
    width = max(1, int(round(T / step)))
    if width >= len(times):
        raise DiagnosticError(f"window T={T:.4g} is longer than the series")
    running = cumulative_trapezoid(values, times, initial=0.0)
    span = times[width:] - times[:-width]
    return (running[width:] - running[:-width]) / span, width


def gronwall_condition_check(times, psi, T):
    times = np.asarray(times, dtype=float)
    if len(times) < 2 or times[-1] - times[0] < 3.0 * T:
        raise DiagnosticError(f"Gronwall check needs a run of at least 3T = {3.0 * T:.4g}")
    psi = np.asarray(psi, dtype=float)
    averages, width = window_averages(times, psi, T)
    negative, _ = window_averages(times, np.maximum(-psi, 0.0), T)
    # exact cancellation shows up as round-off around zero
    scale = max(1.0, float(np.max(np.abs(psi))))
    min_average = float(np.min(averages))
    if abs(min_average) <= 1e-12 * scale:
        min_average = 0.0
    return GronwallReport(
        window=float(T),
        n_windows=len(averages),
        min_average=min_average,
        max_negative_average=float(np.max(negative)),
    )


def psi_all(enstrophy, mu, params, constants):
    """mu - (c_L^4 + (alpha - beta)^4) / (2 (alpha - beta)^3) Z"""
    gap = params.alpha_minus_beta
    weight = (constants.c_L.value ** 4 + gap ** 4) / (2.0 * gap ** 3)
    return mu - weight * np.asarray(enstrophy, dtype=float)


def psi_generalized(enstrophy, mu, params, constants):
    """The same damping with half the gain, for the perturbed system"""
    gap = params.alpha_minus_beta
    weight = (constants.c_L.value ** 4 + gap ** 4) / (2.0 * gap ** 3)
    return mu / 2.0 - weight * np.asarray(enstrophy, dtype=float)


def psi_v_only(enstrophy, mu, G, params, constants):
    """min of the two damping rates in the v-observation argument"""
    gap = params.alpha_minus_beta
    c_L = constants.c_L.value
    epsilon = gap / 2.0
    delta = gap / c_L * 4.0 / (4.0 + gap ** 2 * G ** 2)
    gamma = gap - c_L * delta / 2.0
    enstrophy = np.asarray(enstrophy, dtype=float)
    first = mu - c_L ** 2 / (4.0 * epsilon * delta ** 2) * enstrophy
    second = 8.0 * math.pi ** 2 * gamma - c_L * delta / 2.0 * enstrophy
    return np.minimum(first, second)


def psi_for_mask(mask, enstrophy, mu, G, params, constants):
    """Damping coefficient matching an observation mask, or None when no argument applies"""
    if mask == 'all':
        return psi_all(enstrophy, mu, params, constants)
    if mask in ('v_only', 'w_only'):
        return psi_v_only(enstrophy, mu, G, params, constants)
    return None
