"""Nudged (data-assimilating) MHD co-evolved with a reference solution

The assimilated system is the reference system plus
mu P masked I_h(v + eps1 - v~, w + eps2 - w~) and, optionally, forcing
perturbations delta1, delta2. For a spectral projection the self-damping
part mu P masked I_h(v~, w~) is diagonal per wavevector and joins the
Crank-Nicolson block; the observed part is weighted the same way. Other
interpolants enter explicitly and need mu * dt <= 1.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.db import models

from core.exceptions import (
    DivergenceError, InvalidParameterError, NumericalInstabilityError, StiffnessError,
)
from diagnostics.series import ErrorSeries, error_norms
from mhd.budget import SpinUpPolicy, TrajectoryRecorder, spin_up
from mhd.dynamics import DEFAULT_CFL_SAFETY, Damping, ElsasserState, imex_step, to_elsasser
from observation.interpolants import (
    ObservationMask, damping_factors, interpolate_coefficients, masked_coefficients,
)
from spectral.fields import SpectralVectorField
from spectral.operators import project_coefficients, random_divfree_field, squared_norm_coefficients

logger = logging.getLogger(__name__)

CLOCK_TOLERANCE = 1e-12


class InitMode(models.TextChoices):
    ZERO = 'zero', 'Zero fields'
    COPY = 'copy', 'Copy of the reference'
    CUSTOM = 'custom', 'Caller-supplied divergence-free fields'


class ReferenceInit(models.TextChoices):
    ELSASSER = 'elsasser', 'Random v and w'
    VELOCITY_ONLY = 'velocity_only', 'Random u with b = 0'


@dataclass(frozen=True, eq=False)
class NudgingConfig:
    """Gain, observation operator, mask and the optional perturbations

    ``delta1``/``delta2`` perturb the assimilated forcing of the v and w
    equations, ``eps1``/``eps2`` the observed v and w. All four are
    ``mhd.forcing.Perturbation`` (fixed field times envelope) or None.
    """

    mu: float
    interpolant: object
    mask: str = ObservationMask.ALL
    delta1: object = None
    delta2: object = None
    eps1: object = None
    eps2: object = None

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise InvalidParameterError(f"mu must be finite and >= 0, got {self.mu}")
        if self.mask not in ObservationMask.values:
            raise InvalidParameterError(f"unknown observation mask {self.mask!r}")

    @property
    def implicit(self):
        return self.interpolant.is_spectral

    @property
    def perturbed(self):
        return any(item is not None for item in (self.delta1, self.delta2, self.eps1, self.eps2))

    def as_dict(self):
        return {
            'mu': self.mu,
            'interpolant': self.interpolant.as_dict(),
            'mask': str(self.mask),
            'implicit': self.implicit,
            'perturbed': self.perturbed,
        }


def _perturbation_at(perturbation, t, grid):
    if perturbation is None:
        return np.zeros((2,) + grid.shape, dtype=complex)
    return perturbation.coefficients_at(t)


def check_synchronized(reference, assimilated):
    reference.grid.check_same(assimilated.grid)
    if abs(reference.t - assimilated.t) > CLOCK_TOLERANCE * max(1.0, abs(reference.t)):
        raise InvalidParameterError(
            f"reference (t={reference.t}) and assimilated (t={assimilated.t}) clocks differ"
        )


@dataclass(frozen=True, eq=False)
class AssimilationPair:
    reference: ElsasserState
    assimilated: ElsasserState

    def __post_init__(self):
        check_synchronized(self.reference, self.assimilated)

    @property
    def t(self):
        return self.reference.t

    @property
    def grid(self):
        return self.reference.grid

    def errors(self, swapped=False):
        return error_norms(self.reference, self.assimilated, swapped)


def init_assimilation(reference, config, init_mode=InitMode.ZERO, custom=None):
    """Start the assimilated state: zero, a copy of the reference, or ``custom = (v~, w~)``"""
    grid = reference.grid
    if init_mode == InitMode.ZERO:
        assimilated = ElsasserState.zeros(grid, reference.t)
    elif init_mode == InitMode.COPY:
        assimilated = ElsasserState(reference.v, reference.w, reference.t, reference.tendency)
    elif init_mode == InitMode.CUSTOM:
        if custom is None:
            raise InvalidParameterError("custom initialization needs (v, w) fields")
        v, w = custom
        for name, item in (('v', v), ('w', w)):
            grid.check_same(item.grid)
            if not item.is_divergence_free():
                raise DivergenceError(
                    f"custom initial {name} is not divergence-free "
                    f"(violation {item.divergence_violation():.3g})"
                )
        assimilated = ElsasserState(
            SpectralVectorField(grid, v.coefficients, divergence_free=True),
            SpectralVectorField(grid, w.coefficients, divergence_free=True),
            reference.t,
        )
    else:
        raise InvalidParameterError(f"unknown initialization {init_mode!r}")
    return AssimilationPair(reference, assimilated)


def _feedback(config, eta, zeta, grid, swapped):
    if config.mu == 0:
        zero = np.zeros((2,) + grid.shape, dtype=complex)
        return zero, zero
    feedback_v, feedback_w = masked_coefficients(config.interpolant, config.mask, eta, zeta, grid, swapped)
    return (
        config.mu * project_coefficients(feedback_v, grid),
        config.mu * project_coefficients(feedback_w, grid),
    )


def observation_forcing(config, reference, swapped=False, t=None):
    """mu P masked I_h(v + eps1, w + eps2): the observed part of the feedback"""
    t = reference.t if t is None else t
    grid = reference.grid
    v = reference.v.coefficients + _perturbation_at(config.eps1, t, grid)
    w = reference.w.coefficients + _perturbation_at(config.eps2, t, grid)
    return _feedback(config, v, w, grid, swapped)


def nudging_term(config, reference, assimilated, swapped=False):
    """(F_v, F_w) = mu P masked I_h(v + eps1 - v~, w + eps2 - w~)"""
    check_synchronized(reference, assimilated)
    grid = reference.grid
    eta = reference.v.coefficients + _perturbation_at(config.eps1, reference.t, grid) - assimilated.v.coefficients
    zeta = reference.w.coefficients + _perturbation_at(config.eps2, reference.t, grid) - assimilated.w.coefficients
    feedback_v, feedback_w = _feedback(config, eta, zeta, grid, swapped)
    return (
        SpectralVectorField(grid, feedback_v, divergence_free=True),
        SpectralVectorField(grid, feedback_w, divergence_free=True),
    )


def _forcing_perturbation(config, t, grid):
    if config.delta1 is None and config.delta2 is None:
        return None
    return (
        project_coefficients(_perturbation_at(config.delta1, t, grid), grid),
        project_coefficients(_perturbation_at(config.delta2, t, grid), grid),
    )


def coupled_step(pair, params, forcing, config, dt, cfl_safety=DEFAULT_CFL_SAFETY):
    """Advance reference and assimilated states by one shared step"""
    grid = pair.grid
    swapped = params.swapped
    if not config.implicit and config.mu * dt > 1:
        raise StiffnessError(config.mu, dt)
    reference = imex_step(pair.reference, params, forcing, dt, cfl_safety=cfl_safety)
    source = _forcing_perturbation(config, pair.t, grid)

    if config.implicit:
        factors = config.mu * damping_factors(config.interpolant, config.mask, grid, swapped)
        damping = Damping(vv=factors[0, 0], vw=factors[0, 1], wv=factors[1, 0], ww=factors[1, 1])
        before = observation_forcing(config, pair.reference, swapped)
        after = observation_forcing(config, reference, swapped)
        centred = (0.5 * (before[0] + after[0]), 0.5 * (before[1] + after[1]))
        assimilated = imex_step(
            pair.assimilated, params, forcing, dt, cfl_safety=cfl_safety,
            explicit_source=source, damping=damping, implicit_source=centred,
        )
    else:
        feedback_v, feedback_w = (
            term.coefficients for term in nudging_term(config, pair.reference, pair.assimilated, swapped)
        )
        if source is not None:
            feedback_v, feedback_w = feedback_v + source[0], feedback_w + source[1]
        assimilated = imex_step(
            pair.assimilated, params, forcing, dt, cfl_safety=cfl_safety,
            explicit_source=(feedback_v, feedback_w),
        )
    return AssimilationPair(reference, assimilated)


def perturbation_forcing(config, t, grid):
    """phi(t) = (|delta1|^2 + |delta2|^2) / mu + mu (|I_h eps1|^2 + |I_h eps2|^2)"""
    delta = sum(
        squared_norm_coefficients(item.coefficients_at(t), grid)
        for item in (config.delta1, config.delta2) if item is not None
    )
    observed = sum(
        squared_norm_coefficients(interpolate_coefficients(config.interpolant, item.coefficients_at(t), grid), grid)
        for item in (config.eps1, config.eps2) if item is not None
    )
    if delta == 0:
        first = 0.0
    else:
        first = math.inf if config.mu == 0 else delta / config.mu
    return first + config.mu * observed


@dataclass(frozen=True, eq=False)
class RunSpec:
    """Everything a single assimilation run needs besides the NudgingConfig"""

    params: object
    forcing: object
    dt: float
    horizon: float
    sample_interval: float
    seed: int = 0
    spin_up: SpinUpPolicy = field(default_factory=SpinUpPolicy)
    reference_init: str = ReferenceInit.ELSASSER
    init_mode: str = InitMode.ZERO
    initial_l2: float = 1.0
    initial_k_max: int = None
    cfl_safety: float = DEFAULT_CFL_SAFETY
    initial_reference: ElsasserState = None

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise InvalidParameterError(f"horizon must be positive, got {self.horizon}")
        if self.sample_every < 1:
            raise InvalidParameterError("sample interval must be at least one step")
        if self.reference_init not in ReferenceInit.values:
            raise InvalidParameterError(f"unknown reference initialization {self.reference_init!r}")

    @property
    def grid(self):
        return self.forcing.grid

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def sample_every(self):
        return int(round(self.sample_interval / self.dt))

    def seeds(self):
        """Independent seed streams for reference v, reference w and a custom start"""
        return np.random.SeedSequence(self.seed).spawn(4)


def build_reference_initial(run_spec):
    if run_spec.initial_reference is not None:
        return run_spec.initial_reference
    grid = run_spec.grid
    seed_v, seed_w, _, _ = run_spec.seeds()
    options = {'energy_spectrum_decay': 1.0, 'k_max': run_spec.initial_k_max, 'l2': run_spec.initial_l2}
    if run_spec.reference_init == ReferenceInit.VELOCITY_ONLY:
        u = random_divfree_field(grid, seed_v, **options)
        v, w = to_elsasser(u, SpectralVectorField.zeros(grid), run_spec.params.swapped)
    else:
        v = random_divfree_field(grid, seed_v, **options)
        w = random_divfree_field(grid, seed_w, **options)
    return ElsasserState(v, w)


def custom_initial(run_spec):
    """Random divergence-free start for InitMode.CUSTOM"""
    grid = run_spec.grid
    _, _, seed_v, seed_w = run_spec.seeds()
    options = {'energy_spectrum_decay': 1.0, 'k_max': run_spec.initial_k_max, 'l2': run_spec.initial_l2}
    return random_divfree_field(grid, seed_v, **options), random_divfree_field(grid, seed_w, **options)


@dataclass(frozen=True, eq=False)
class AssimilationResult:
    errors: ErrorSeries
    trajectory: object
    spin_up: object
    pair: AssimilationPair
    phi: np.ndarray
    config: NudgingConfig
    run_spec: RunSpec


def run_assimilation(config, run_spec, custom=None):
    """Spin up the reference, reset the clock and co-evolve to the horizon"""
    params, forcing = run_spec.params, run_spec.forcing
    grid = run_spec.grid
    config.interpolant.check_grid(grid)
    reference, spin_report = spin_up(
        build_reference_initial(run_spec), params, forcing, run_spec.dt,
        policy=run_spec.spin_up, cfl_safety=run_spec.cfl_safety,
    )
    if run_spec.init_mode == InitMode.CUSTOM and custom is None:
        custom = custom_initial(run_spec)
    pair = init_assimilation(reference, config, run_spec.init_mode, custom)

    recorder = TrajectoryRecorder(params, forcing)
    samples, phi = [], []

    def sample(current):
        samples.append(current.errors(params.swapped))
        recorder.record(current.reference)
        phi.append(perturbation_forcing(config, current.t, grid))

    sample(pair)
    every = run_spec.sample_every
    for step in range(1, run_spec.steps + 1):
        pair = coupled_step(pair, params, forcing, config, run_spec.dt, run_spec.cfl_safety)
        if not (pair.reference.is_finite() and pair.assimilated.is_finite()):
            parameters = {
                'mu': config.mu, 'dt': run_spec.dt, 'h': config.interpolant.h,
                'mask': str(config.mask), 'Re': params.Re, 'Rm': params.Rm,
            }
            logger.error(f"Assimilation blew up at step {step} (t={pair.t:.6g})")
            raise NumericalInstabilityError(step, pair.t, parameters)
        if step % every == 0:
            sample(pair)

    errors = ErrorSeries.from_samples(samples)
    logger.info(
        f"Assimilation finished at t={pair.t:.4g}: L2 error {errors.l2_total[0]:.3e} -> {errors.l2_total[-1]:.3e}"
    )
    return AssimilationResult(
        errors=errors,
        trajectory=recorder.trajectory(),
        spin_up=spin_report,
        pair=pair,
        phi=np.array(phi),
        config=config,
        run_spec=run_spec,
    )
