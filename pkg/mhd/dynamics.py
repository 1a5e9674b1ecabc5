"""Elsasser-form MHD: state, right-hand side and the IMEX time step

The diffusion block (alpha, beta; beta, alpha) is advanced with Crank-Nicolson
as a 2x2 solve per wavevector; advection and forcing use Adams-Bashforth 2
after one Euler step. Extra linear damping and sources (the nudging feedback)
plug into the same solve through ``Damping`` and ``implicit_source``.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.exceptions import CflViolationError, InvalidParameterError
from spectral.fields import SpectralVectorField
from spectral.operators import (
    advection_coefficients, max_speed_coefficients, project_coefficients,
)

logger = logging.getLogger(__name__)

DEFAULT_CFL_SAFETY = 0.5


@dataclass(frozen=True, eq=False)
class Tendency:
    """Explicit terms of the previous step, kept for Adams-Bashforth"""

    v: np.ndarray
    w: np.ndarray
    dt: float


@dataclass(frozen=True, eq=False)
class ElsasserState:
    v: SpectralVectorField
    w: SpectralVectorField
    t: float = 0.0
    tendency: Tendency = field(default=None, repr=False)

    def __post_init__(self):
        self.v.grid.check_same(self.w.grid)

    @property
    def grid(self):
        return self.v.grid

    @classmethod
    def zeros(cls, grid, t=0.0):
        zero = SpectralVectorField.zeros(grid)
        return cls(zero, zero, t)

    def is_finite(self):
        return self.v.is_finite() and self.w.is_finite()

    def restart_clock(self, t=0.0):
        """Same fields at a new time; the multistep history is dropped"""
        return replace(self, t=t, tendency=None)

    def without_history(self):
        return replace(self, tendency=None)


@dataclass(frozen=True, eq=False)
class Damping:
    """Per-wavevector linear damping D acting on (v, w): d(v, w)/dt = ... - D (v, w)

    Each entry is an (n, n) array or a scalar.
    """

    vv: object = 0.0
    vw: object = 0.0
    wv: object = 0.0
    ww: object = 0.0


def to_elsasser(u, b, swapped=False):
    u.grid.check_same(b.grid)
    v = u + b
    w = b - u if swapped else u - b
    return v, w


def from_elsasser(v, w, swapped=False):
    v.grid.check_same(w.grid)
    if swapped:
        return (v - w) / 2, (v + w) / 2
    return (v + w) / 2, (v - w) / 2


def _diffusion_rate(grid):
    return 4.0 * math.pi ** 2 * grid.k_squared


def explicit_coefficients(v, w, params, forcing, t, grid):
    """Projected advection and forcing for raw coefficient arrays"""
    sign = params.advection_sign
    f, g = forcing.coefficients_at(t)
    nv = f - sign * advection_coefficients(w, v, grid)
    nw = g - advection_coefficients(v, w, grid)
    return project_coefficients(nv, grid), project_coefficients(nw, grid)


def diffusion_coefficients(v, w, params, grid):
    kappa = _diffusion_rate(grid)
    return (
        -kappa * (params.alpha * v + params.beta * w),
        -kappa * (params.beta * v + params.alpha * w),
    )


def mhd_rhs(state, params, forcing, t=None):
    """Leray-projected time derivatives (dv/dt, dw/dt)"""
    t = state.t if t is None else t
    grid = state.grid
    v, w = state.v.coefficients, state.w.coefficients
    nv, nw = explicit_coefficients(v, w, params, forcing, t, grid)
    dv, dw = diffusion_coefficients(v, w, params, grid)
    return (
        SpectralVectorField(grid, project_coefficients(dv + nv, grid), divergence_free=True),
        SpectralVectorField(grid, project_coefficients(dw + nw, grid), divergence_free=True),
    )


def energy_rate(state, params, forcing, t=None):
    """d/dt (|v|^2 + |w|^2) = 2 <RHS_v, v> + 2 <RHS_w, w>"""
    dv, dw = mhd_rhs(state, params, forcing, t)
    v, w = state.v.coefficients, state.w.coefficients
    return 2.0 * float(np.real(np.sum(dv.coefficients * np.conj(v)) + np.sum(dw.coefficients * np.conj(w))))


def admissible_dt(state, cfl_safety=DEFAULT_CFL_SAFETY):
    grid = state.grid
    speed = max(
        max_speed_coefficients(state.v.coefficients, grid),
        max_speed_coefficients(state.w.coefficients, grid),
    )
    if speed == 0:
        return math.inf, speed
    return cfl_safety * grid.spacing / speed, speed


def check_cfl(state, dt, cfl_safety=DEFAULT_CFL_SAFETY):
    limit, speed = admissible_dt(state, cfl_safety)
    if dt > limit:
        raise CflViolationError(dt, limit, speed)


def imex_step(state, params, forcing, dt, *, cfl_safety=DEFAULT_CFL_SAFETY,
              explicit_source=None, damping=None, implicit_source=None):
    """Advance one step of size dt

    ``explicit_source`` (a pair of coefficient arrays) joins the
    Adams-Bashforth terms; ``damping`` and ``implicit_source`` join the
    Crank-Nicolson block, the source being supplied already time-centred.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    check_cfl(state, dt, cfl_safety)

    grid = state.grid
    v, w = state.v.coefficients, state.w.coefficients
    nv, nw = explicit_coefficients(v, w, params, forcing, state.t, grid)
    if explicit_source is not None:
        nv = nv + explicit_source[0]
        nw = nw + explicit_source[1]

    history = state.tendency
    if history is not None and history.dt == dt:
        ev = 1.5 * nv - 0.5 * history.v
        ew = 1.5 * nw - 0.5 * history.w
    else:
        ev, ew = nv, nw

    damping = damping or Damping()
    kappa = _diffusion_rate(grid)
    lvv = kappa * params.alpha + damping.vv
    lvw = kappa * params.beta + damping.vw
    lwv = kappa * params.beta + damping.wv
    lww = kappa * params.alpha + damping.ww

    half = 0.5 * dt
    rv = v - half * (lvv * v + lvw * w) + dt * ev
    rw = w - half * (lwv * v + lww * w) + dt * ew
    if implicit_source is not None:
        rv = rv + dt * implicit_source[0]
        rw = rw + dt * implicit_source[1]

    a11 = 1.0 + half * lvv
    a12 = half * lvw
    a21 = half * lwv
    a22 = 1.0 + half * lww
    determinant = a11 * a22 - a12 * a21
    v_next = (a22 * rv - a12 * rw) / determinant
    w_next = (a11 * rw - a21 * rv) / determinant

    return ElsasserState(
        SpectralVectorField(grid, project_coefficients(v_next, grid), divergence_free=True),
        SpectralVectorField(grid, project_coefficients(w_next, grid), divergence_free=True),
        state.t + dt,
        Tendency(nv, nw, dt),
    )


def integrate(state, params, forcing, dt, steps, *, cfl_safety=DEFAULT_CFL_SAFETY, on_step=None):
    """Take ``steps`` plain steps, calling ``on_step(index, state)`` after each"""
    for index in range(1, steps + 1):
        state = imex_step(state, params, forcing, dt, cfl_safety=cfl_safety)
        if on_step is not None:
            on_step(index, state)
    return state
