"""Body forces in Elsasser form, Grashof numbers and nondimensionalization

Forcing is stored as f = f1 + g1 and g = f1 - g1 (g = g1 - f1 in the swapped
convention). Time dependence is a scalar envelope applied to both; decaying
transients ride on top and are ignored by the limsup in the Grashof number.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from django.db import models

from core.exceptions import InvalidParameterError
from spectral.fields import SpectralVectorField
from spectral.operators import l2_norm, leray_project

from .params import derive_elsasser_params

logger = logging.getLogger(__name__)


class ForcingKind(models.TextChoices):
    STEADY = 'steady', 'Steady low-mode'
    MODULATED = 'modulated', 'Time-modulated'


@dataclass(frozen=True)
class Envelope:
    """m(t) = offset + amplitude * exp(-decay t) * cos(2 pi frequency t)"""

    amplitude: float = 0.0
    frequency: float = 0.0
    offset: float = 1.0
    decay: float = 0.0

    def __post_init__(self):
        if self.decay < 0:
            raise InvalidParameterError(f"envelope decay must be >= 0, got {self.decay}")
        if not all(math.isfinite(value) for value in (self.amplitude, self.frequency, self.offset, self.decay)):
            raise InvalidParameterError("envelope parameters must be finite")

    @classmethod
    def decaying(cls, rate, amplitude=1.0):
        return cls(amplitude=amplitude, frequency=0.0, offset=0.0, decay=rate)

    def __call__(self, t):
        return self.offset + self.amplitude * math.exp(-self.decay * t) * math.cos(
            2.0 * math.pi * self.frequency * t
        )

    def limsup_abs(self):
        if self.decay > 0 or self.amplitude == 0:
            return abs(self.offset)
        if self.frequency != 0:
            return abs(self.offset) + abs(self.amplitude)
        return abs(self.offset + self.amplitude)

    def sup_abs(self):
        return abs(self.offset) + abs(self.amplitude)

    def vanishes(self):
        return self.limsup_abs() == 0.0

    def as_dict(self):
        return {
            'amplitude': self.amplitude, 'frequency': self.frequency,
            'offset': self.offset, 'decay': self.decay,
        }


@dataclass(frozen=True, eq=False)
class Perturbation:
    """A fixed field times a scalar envelope"""

    field: SpectralVectorField
    envelope: Envelope

    def coefficients_at(self, t):
        return self.field.coefficients * self.envelope(t)

    def at(self, t):
        return self.field * self.envelope(t)


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    f: SpectralVectorField
    g: SpectralVectorField
    kind: str = ForcingKind.STEADY
    modulation: Envelope = None
    transient_f: Perturbation = None
    transient_g: Perturbation = None

    def __post_init__(self):
        self.f.grid.check_same(self.g.grid)
        if self.kind == ForcingKind.MODULATED and self.modulation is None:
            raise InvalidParameterError("modulated forcing needs a modulation envelope")
        if self.kind == ForcingKind.STEADY and self.modulation is not None:
            raise InvalidParameterError("steady forcing cannot carry a modulation envelope")
        for name in ('transient_f', 'transient_g'):
            transient = getattr(self, name)
            if transient is None:
                continue
            transient.field.grid.check_same(self.f.grid)
            if not transient.envelope.vanishes():
                raise InvalidParameterError(f"{name} must decay to zero")

    @property
    def grid(self):
        return self.f.grid

    @classmethod
    def zero(cls, grid):
        zero = SpectralVectorField.zeros(grid)
        return cls(zero, zero)

    @classmethod
    def from_primitive(cls, f1, g1, params, modulation=None):
        """Build (f, g) from the momentum forcing f1 and the induction forcing g1"""
        f = f1 + g1
        g = g1 - f1 if params.swapped else f1 - g1
        kind = ForcingKind.STEADY if modulation is None else ForcingKind.MODULATED
        return cls(f, g, kind=kind, modulation=modulation)

    def factor(self, t):
        return 1.0 if self.modulation is None else self.modulation(t)

    def limsup_factor(self):
        return 1.0 if self.modulation is None else self.modulation.limsup_abs()

    def coefficients_at(self, t):
        """(f(t), g(t)) as coefficient arrays"""
        factor = self.factor(t)
        f = self.f.coefficients * factor
        g = self.g.coefficients * factor
        if self.transient_f is not None:
            f = f + self.transient_f.coefficients_at(t)
        if self.transient_g is not None:
            g = g + self.transient_g.coefficients_at(t)
        return f, g

    def squared_norm_at(self, t):
        f, g = self.coefficients_at(t)
        return float(np.sum(np.abs(f) ** 2) + np.sum(np.abs(g) ** 2))

    def limsup_squared_norm(self):
        return self.limsup_factor() ** 2 * (l2_norm(self.f) ** 2 + l2_norm(self.g) ** 2)

    def with_transients(self, transient_f=None, transient_g=None):
        return replace(self, transient_f=transient_f, transient_g=transient_g)

    def scaled(self, factor):
        return replace(self, f=self.f * factor, g=self.g * factor)

    def is_zero(self):
        return l2_norm(self.f) == 0 and l2_norm(self.g) == 0 and self.transient_f is None and self.transient_g is None


def kolmogorov_forcing(grid, params, f1_amplitude, g1_amplitude, wavenumber=1, modulation=None):
    """Steady shear forcing f1 = A_f (sin 2 pi k y, 0), g1 = A_g (0, sin 2 pi k x)"""
    if not 1 <= wavenumber <= grid.dealias_cutoff:
        raise InvalidParameterError(
            f"forcing wavenumber {wavenumber} must lie in [1, {grid.dealias_cutoff}]"
        )
    k = int(wavenumber)
    f1 = np.zeros((2,) + grid.shape, dtype=complex)
    g1 = np.zeros((2,) + grid.shape, dtype=complex)
    # sin(2 pi k y) = (e^{2 pi i k y} - e^{-2 pi i k y}) / 2i
    f1[0, 0, k] = -0.5j * f1_amplitude
    f1[0, 0, -k] = 0.5j * f1_amplitude
    g1[1, k, 0] = -0.5j * g1_amplitude
    g1[1, -k, 0] = 0.5j * g1_amplitude
    return ForcingSpec.from_primitive(
        SpectralVectorField(grid, f1, divergence_free=True),
        SpectralVectorField(grid, g1, divergence_free=True),
        params,
        modulation=modulation,
    )


def grashof_number(forcing, params):
    """G = max(Re^2, Rm^2) / pi^2 * limsup max(|f + g|, |f - g|)"""
    scale = max(params.Re ** 2, params.Rm ** 2) / math.pi ** 2
    steady = max(l2_norm(forcing.f + forcing.g), l2_norm(forcing.f - forcing.g))
    return scale * forcing.limsup_factor() * steady


def forcing_scales(dimensional):
    """Multipliers taking dimensional (f1, g1) to nondimensional form"""
    base = dimensional.length / dimensional.velocity ** 2
    return base, base / math.sqrt(dimensional.rho0 * dimensional.mu0)


def nondimensionalize(dimensional, f1, g1, modulation=None):
    """Scale dimensional forcing sampled on the unit grid into an Elsasser problem

    ``f1`` and ``g1`` hold the dimensional forcing at the points x L of
    [0, L]^2. The magnetic forcing is premultiplied by (rho0 mu0)^(-1/2).
    """
    params = derive_elsasser_params(dimensional.reynolds, dimensional.magnetic_reynolds)
    f_scale, g_scale = forcing_scales(dimensional)
    forcing = ForcingSpec.from_primitive(
        leray_project(f1 * f_scale), leray_project(g1 * g_scale), params, modulation=modulation
    )
    return params, forcing


def primitive_forcing(forcing, params):
    """Recover (f1, g1) from an Elsasser forcing"""
    f1 = (forcing.f + forcing.g) / 2 if not params.swapped else (forcing.f - forcing.g) / 2
    g1 = (forcing.f - forcing.g) / 2 if not params.swapped else (forcing.f + forcing.g) / 2
    return f1, g1


def redimensionalize_forcing(dimensional, forcing, params):
    f_scale, g_scale = forcing_scales(dimensional)
    f1, g1 = primitive_forcing(forcing, params)
    return f1 / f_scale, g1 / g_scale


def dimensional_grashof_number(dimensional, f1, g1, modulation=None):
    """G = (8 / lambda_1) max(1/nu^2, 1/lam^2) limsup max(|f1|, |g1| / sqrt(rho0 mu0))

    Norms are taken over [0, L]^2, i.e. L times the unit-square norm of the
    sampled fields.
    """
    length = dimensional.length
    strength = max(l2_norm(f1), l2_norm(g1) / math.sqrt(dimensional.rho0 * dimensional.mu0)) * length
    if modulation is not None:
        strength *= modulation.limsup_abs()
    inverse_diffusivity = max(1.0 / dimensional.nu ** 2, 1.0 / dimensional.lam ** 2)
    return 8.0 / dimensional.first_eigenvalue * inverse_diffusivity * strength
