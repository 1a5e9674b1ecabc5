"""Calculus, projection, dealiasing and norms on spectral fields

Functions come in two layers: field-level operations on ``SpectralScalar``
and ``SpectralVectorField``, and ``*_coefficients`` kernels working on raw
(2, n, n) coefficient arrays, which the time steppers use directly.
"""
import logging

import numpy as np

from core.exceptions import InvalidParameterError

from .fields import SpectralScalar, SpectralVectorField

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def _as_field_like(template, coefficients, divergence_free=False):
    if isinstance(template, SpectralScalar):
        return SpectralScalar(template.grid, coefficients)
    return SpectralVectorField(template.grid, coefficients, divergence_free)


def _squared_weights(grid, order):
    if order == 0:
        return None
    return (4.0 * np.pi ** 2 * grid.k_squared) ** order


# Coefficient kernels

def project_coefficients(coefficients, grid):
    """Leray projection of (2, n, n) coefficients, mean mode zeroed"""
    k1, k2 = grid.wavenumbers
    k_squared = np.where(grid.k_squared == 0, 1.0, grid.k_squared)
    k_dot_u = (k1 * coefficients[0] + k2 * coefficients[1]) / k_squared
    projected = np.stack([coefficients[0] - k1 * k_dot_u, coefficients[1] - k2 * k_dot_u])
    projected[:, 0, 0] = 0.0
    return projected


def physical_coefficients(coefficients, grid):
    n = grid.n
    return np.real(np.fft.ifft2(coefficients, axes=(-2, -1))) * (n * n)


def spectral_coefficients(samples, grid):
    n = grid.n
    coefficients = np.fft.fft2(samples, axes=(-2, -1)) / (n * n)
    coefficients[..., 0, 0] = 0.0
    return coefficients


def advection_coefficients(a, b, grid):
    """Dealiased (a . grad) b for (2, n, n) coefficient arrays a and b"""
    keep = grid.dealias_mask
    k1, k2 = grid.wavenumbers
    a = a * keep
    b = b * keep
    velocity = physical_coefficients(a, grid)
    d1 = physical_coefficients(1j * TWO_PI * k1 * b, grid)
    d2 = physical_coefficients(1j * TWO_PI * k2 * b, grid)
    product = velocity[0] * d1 + velocity[1] * d2
    return spectral_coefficients(product, grid) * keep


def max_speed_coefficients(coefficients, grid):
    samples = physical_coefficients(coefficients, grid)
    return float(np.max(np.hypot(samples[0], samples[1])))


def squared_norm_coefficients(coefficients, grid, order=0):
    """sum |k-weight|^order |u_hat|^2 over all modes and components"""
    power = np.abs(coefficients) ** 2
    weights = _squared_weights(grid, order)
    if weights is not None:
        power = power * weights
    return float(np.sum(power))


# Field-level operations

def gradient(scalar):
    k1, k2 = scalar.grid.wavenumbers
    c = scalar.coefficients
    return SpectralVectorField(scalar.grid, np.stack([1j * TWO_PI * k1 * c, 1j * TWO_PI * k2 * c]))


def divergence(field):
    k1, k2 = field.grid.wavenumbers
    c = field.coefficients
    return SpectralScalar(field.grid, 1j * TWO_PI * (k1 * c[0] + k2 * c[1]))


def laplacian(field):
    """Laplacian of a scalar or a vector field (componentwise)"""
    factor = -4.0 * np.pi ** 2 * field.grid.k_squared
    divergence_free = getattr(field, 'divergence_free', False)
    return _as_field_like(field, field.coefficients * factor, divergence_free)


def leray_project(field):
    return SpectralVectorField(
        field.grid, project_coefficients(field.coefficients, field.grid), divergence_free=True
    )


def dealias(field):
    """Zero every mode with max(|k1|, |k2|) > n // 3"""
    divergence_free = getattr(field, 'divergence_free', False)
    return _as_field_like(field, field.coefficients * field.grid.dealias_mask, divergence_free)


def advection(a, b):
    """Pseudo-spectral (a . grad) b with two-thirds dealiasing"""
    a.grid.check_same(b.grid)
    return SpectralVectorField(a.grid, advection_coefficients(a.coefficients, b.coefficients, a.grid))


def _norm(field, order):
    return float(np.sqrt(squared_norm_coefficients(field.coefficients, field.grid, order)))


def l2_norm(field):
    return _norm(field, 0)


def h1_seminorm(field):
    return _norm(field, 1)


def h2_seminorm(field):
    return _norm(field, 2)


def inner_product(first, second):
    first.grid.check_same(second.grid)
    return float(np.real(np.sum(first.coefficients * np.conj(second.coefficients))))


# Random fields

def _band_limited_coefficients(grid, rng, decay, k_max, components):
    if k_max is None:
        k_max = grid.dealias_cutoff
    if k_max < 1 or k_max > grid.dealias_cutoff:
        raise InvalidParameterError(
            f"k_max={k_max} must lie in [1, {grid.dealias_cutoff}] for grid n={grid.n}"
        )
    magnitude = np.sqrt(grid.k_squared)
    amplitude = np.zeros(grid.shape)
    band = (magnitude > 0) & (magnitude <= k_max)
    amplitude[band] = magnitude[band] ** (-decay)
    white = rng.standard_normal((components,) + grid.shape)
    coefficients = np.fft.fft2(white, axes=(-2, -1))
    modulus = np.abs(coefficients)
    phases = np.divide(coefficients, modulus, out=np.zeros_like(coefficients), where=modulus > 0)
    return phases * amplitude


def _rescale(coefficients, grid, l2):
    if l2 is None:
        return coefficients
    current = np.sqrt(squared_norm_coefficients(coefficients, grid))
    if current == 0:
        return coefficients
    return coefficients * (l2 / current)


def random_divfree_field(grid, seed, energy_spectrum_decay=1.0, k_max=None, l2=None):
    """Random divergence-free field with |u_hat(k)| ~ |k|^-decay for |k| <= k_max

    ``seed`` may be an int or a ``numpy.random.SeedSequence``; ``l2`` rescales
    the result to the requested L2 norm.
    """
    rng = np.random.default_rng(seed)
    coefficients = _band_limited_coefficients(grid, rng, energy_spectrum_decay, k_max, 2)
    coefficients = project_coefficients(coefficients, grid)
    return SpectralVectorField(grid, _rescale(coefficients, grid, l2), divergence_free=True)


def random_scalar_field(grid, seed, energy_spectrum_decay=1.0, k_max=None, l2=None):
    rng = np.random.default_rng(seed)
    coefficients = _band_limited_coefficients(grid, rng, energy_spectrum_decay, k_max, 1)
    return SpectralScalar(grid, _rescale(coefficients, grid, l2)[0])
