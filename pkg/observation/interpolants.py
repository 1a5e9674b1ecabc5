"""Observation operators I_h and component masks

Three interpolants are provided: a spectral projection onto
max(|k1|, |k2|) <= 1/h, cell averages over (1/h)^2 squares and bilinear
interpolation from (1/h)^2 nodes. Grid-based ones act on the physical
samples of the field and return mean-zero results.
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from django.db import models

from core.exceptions import InterpolantError
from spectral.fields import SpectralScalar, SpectralVectorField
from spectral.operators import physical_coefficients, spectral_coefficients

logger = logging.getLogger(__name__)


class InterpolantKind(models.TextChoices):
    SPECTRAL_PROJECTION = 'spectral', 'Spectral projection'
    VOLUME_AVERAGE = 'volume', 'Volume average'
    NODAL_BILINEAR = 'nodal', 'Nodal bilinear'


TYPE_CLASS = {
    InterpolantKind.SPECTRAL_PROJECTION: 1,
    InterpolantKind.VOLUME_AVERAGE: 1,
    InterpolantKind.NODAL_BILINEAR: 2,
}


@dataclass(frozen=True)
class InterpolantSpec:
    kind: str
    h: float
    c1: float = None
    c2: float = None
    c3: float = None

    def __post_init__(self):
        if self.kind not in InterpolantKind.values:
            raise InterpolantError(f"unknown interpolant kind {self.kind!r}")
        if not 0 < self.h <= 1:
            raise InterpolantError(f"h must lie in (0, 1], got {self.h}")
        inverse = 1.0 / self.h
        if abs(inverse - round(inverse)) > 1e-9 * inverse:
            raise InterpolantError(f"1/h must be an integer, got h={self.h}")

    @property
    def type_class(self):
        return TYPE_CLASS[self.kind]

    @property
    def resolution(self):
        """N = 1/h: retained wavenumber for projections, cells or nodes per axis otherwise"""
        return int(round(1.0 / self.h))

    @property
    def is_spectral(self):
        return self.kind == InterpolantKind.SPECTRAL_PROJECTION

    def check_grid(self, grid):
        if not self.is_spectral and grid.n % self.resolution:
            raise InterpolantError(
                f"{self.resolution} {self.get_kind_display().lower()} cells per axis do not divide n={grid.n}"
            )

    def get_kind_display(self):
        return InterpolantKind(self.kind).label

    def with_constants(self, **constants):
        return replace(self, **constants)

    def as_dict(self):
        report = {'kind': self.kind, 'h': self.h, 'type_class': self.type_class}
        if self.type_class == 1:
            report['c1'] = self.c1
        else:
            report.update(c2=self.c2, c3=self.c3)
        return report


class ObservationMask(models.TextChoices):
    ALL = 'all', 'All components of v and w'
    FIRST_COMPONENT = 'first_component', 'First components of v and w'
    SECOND_COMPONENT = 'second_component', 'Second components of v and w'
    V_ONLY = 'v_only', 'v only'
    W_ONLY = 'w_only', 'w only'
    U_ONLY = 'u_only', 'Velocity u only'
    B_ONLY = 'b_only', 'Magnetic field b only'


MASK_COMPONENTS = {
    ObservationMask.FIRST_COMPONENT: (0,),
    ObservationMask.SECOND_COMPONENT: (1,),
}

_VELOCITY = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]])
_MAGNETIC = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]])


def mask_components(mask):
    return MASK_COMPONENTS.get(mask, (0, 1))


def mask_coupling(mask, swapped=False):
    """2x2 matrix taking observed (eta, zeta) to (feedback_v, feedback_w)

    u-only and b-only observations feed back u - u~ = (eta + zeta)/2 or
    b - b~ = (eta - zeta)/2 into both equations; the swapped convention
    w = b - u exchanges the two.
    """
    if mask == ObservationMask.V_ONLY:
        return np.diag([1.0, 0.0])
    if mask == ObservationMask.W_ONLY:
        return np.diag([0.0, 1.0])
    if mask == ObservationMask.U_ONLY:
        return _MAGNETIC if swapped else _VELOCITY
    if mask == ObservationMask.B_ONLY:
        return _VELOCITY if swapped else _MAGNETIC
    return np.eye(2)


@lru_cache(maxsize=None)
def _bilinear_matrix(n, nodes):
    """Periodic linear interpolation from ``nodes`` equispaced nodes to n points"""
    stride = n // nodes
    matrix = np.zeros((n, nodes))
    for i in range(n):
        cell, offset = divmod(i, stride)
        weight = offset / stride
        matrix[i, cell] += 1.0 - weight
        matrix[i, (cell + 1) % nodes] += weight
    matrix.setflags(write=False)
    return matrix


def _spectral_window(grid, resolution):
    k1, k2 = grid.wavenumbers
    return (np.abs(k1) <= resolution) & (np.abs(k2) <= resolution)


def interpolate_coefficients(spec, coefficients, grid):
    """Apply I_h to coefficient arrays of shape (..., n, n)"""
    spec.check_grid(grid)
    m = spec.resolution
    if spec.is_spectral:
        result = coefficients * _spectral_window(grid, m)
        result[..., 0, 0] = 0.0
        return result

    samples = physical_coefficients(coefficients, grid)
    n = grid.n
    stride = n // m
    leading = samples.shape[:-2]
    if spec.kind == InterpolantKind.VOLUME_AVERAGE:
        means = samples.reshape(leading + (m, stride, m, stride)).mean(axis=(-3, -1))
        observed = np.repeat(np.repeat(means, stride, axis=-2), stride, axis=-1)
    else:
        nodes = samples[..., ::stride, ::stride]
        matrix = _bilinear_matrix(n, m)
        observed = matrix @ nodes @ matrix.T
    return spectral_coefficients(observed, grid)


def apply_interpolant(spec, field):
    """I_h of a scalar (or of each component of a vector field)"""
    coefficients = interpolate_coefficients(spec, np.array(field.coefficients), field.grid)
    if isinstance(field, SpectralScalar):
        return SpectralScalar(field.grid, coefficients)
    return SpectralVectorField(field.grid, coefficients)


def masked_coefficients(spec, mask, eta, zeta, grid, swapped=False):
    """Observed feedback (before projection) for coefficient arrays eta, zeta"""
    stacked = np.stack([eta, zeta])
    observed = np.zeros_like(stacked)
    for component in mask_components(mask):
        observed[:, component] = interpolate_coefficients(spec, stacked[:, component], grid)
    coupling = mask_coupling(mask, swapped)
    feedback = np.einsum('ij,j...->i...', coupling, observed)
    return feedback[0], feedback[1]


def apply_masked(spec, mask, difference, swapped=False):
    """(feedback_v, feedback_w) for a state difference (eta, zeta)"""
    eta, zeta = difference
    eta.grid.check_same(zeta.grid)
    feedback_v, feedback_w = masked_coefficients(
        spec, mask, eta.coefficients, zeta.coefficients, eta.grid, swapped
    )
    return SpectralVectorField(eta.grid, feedback_v), SpectralVectorField(eta.grid, feedback_w)


def damping_factors(spec, mask, grid, swapped=False):
    """Per-wavevector 2x2 operator equal to P (masked I_h) on divergence-free fields

    Shape (2, 2, n, n). Only a spectral projection is diagonal in Fourier
    space; for a divergence-free mode the first-component observation
    reduces to multiplication by k2^2 / |k|^2 (k1^2 / |k|^2 for the second).
    """
    if not spec.is_spectral:
        raise InterpolantError(f"{spec.get_kind_display()} has no per-mode damping operator")
    window = _spectral_window(grid, spec.resolution).astype(float)
    k1, k2 = grid.wavenumbers
    k_squared = np.where(grid.k_squared == 0, 1.0, grid.k_squared)
    components = mask_components(mask)
    if components == (0,):
        window = window * (k2 * k2) / k_squared
    elif components == (1,):
        window = window * (k1 * k1) / k_squared
    window[0, 0] = 0.0
    coupling = mask_coupling(mask, swapped)
    return coupling[:, :, None, None] * window[None, None, :, :]

