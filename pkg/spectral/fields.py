"""Periodic fields on the unit square stored as Fourier coefficients

Coefficients follow u(x) = sum_k u_hat(k) exp(2 pi i k.x), so that
u_hat = fft2(u) / n**2. Axis 0 of a physical array is x (wavenumber k1),
axis 1 is y (k2).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from core.exceptions import DivergenceError, GridMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-12


@lru_cache(maxsize=None)
def _wavenumber_table(n):
    k = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)
    k1, k2 = np.meshgrid(k, k, indexing='ij')
    cutoff = n // 3
    k_squared = (k1 * k1 + k2 * k2).astype(float)
    keep = (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff)
    for array in (k1, k2, k_squared, keep):
        array.setflags(write=False)
    return k1, k2, k_squared, keep


@dataclass(frozen=True)
class Grid:
    """Uniform n x n grid on [0, 1]^2"""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise InvalidParameterError(f"grid size must be an even integer >= 8, got {self.n}")

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def dealias_cutoff(self):
        return self.n // 3

    @property
    def wavenumbers(self):
        """Integer wavenumber arrays (k1, k2) in FFT order"""
        k1, k2, _, _ = _wavenumber_table(self.n)
        return k1, k2

    @property
    def k_squared(self):
        return _wavenumber_table(self.n)[2]

    @property
    def dealias_mask(self):
        return _wavenumber_table(self.n)[3]

    def coordinates(self):
        x = np.arange(self.n) / self.n
        return np.meshgrid(x, x, indexing='ij')

    def check_same(self, other):
        if other != self:
            raise GridMismatchError(f"grid n={self.n} does not match grid n={other.n}")


@dataclass(frozen=True, eq=False)
class SpectralScalar:
    """Real, mean-zero periodic scalar field"""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=complex)
        if coefficients.shape != self.grid.shape:
            raise GridMismatchError(
                f"coefficients of shape {coefficients.shape} do not fit grid n={self.grid.n}"
            )
        coefficients[0, 0] = 0.0
        coefficients.setflags(write=False)
        object.__setattr__(self, 'coefficients', coefficients)
        if not self.is_hermitian():
            raise InvalidParameterError("scalar coefficients must satisfy c(-k) = conj(c(k))")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def is_hermitian(self, tolerance=1e-12):
        c = self.coefficients
        mirrored = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
        scale = max(float(np.max(np.abs(c))), 1e-300)
        return bool(np.max(np.abs(c - mirrored)) <= tolerance * scale)

    def to_physical(self):
        return inverse_transform(self)

    def _combine(self, other, op):
        self.grid.check_same(other.grid)
        return SpectralScalar(self.grid, op(self.coefficients, other.coefficients))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, factor):
        return SpectralScalar(self.grid, self.coefficients * factor)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralScalar(self.grid, -self.coefficients)


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    """Two-component mean-zero periodic vector field

    ``coefficients`` has shape (2, n, n). The ``divergence_free`` flag is set
    by operations that guarantee it (Leray projection, and arithmetic on
    flagged fields); ``solenoidal`` validates user-supplied data.
    """

    grid: Grid
    coefficients: np.ndarray
    divergence_free: bool = False

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=complex)
        if coefficients.shape != (2,) + self.grid.shape:
            raise GridMismatchError(
                f"vector coefficients of shape {coefficients.shape} do not fit grid n={self.grid.n}"
            )
        coefficients[:, 0, 0] = 0.0
        coefficients.setflags(write=False)
        object.__setattr__(self, 'coefficients', coefficients)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((2,) + grid.shape, dtype=complex), divergence_free=True)

    @classmethod
    def from_components(cls, first, second, divergence_free=False):
        first.grid.check_same(second.grid)
        return cls(first.grid, np.stack([first.coefficients, second.coefficients]), divergence_free)

    @classmethod
    def solenoidal(cls, grid, coefficients):
        """Wrap coefficients that must already be divergence-free"""
        candidate = cls(grid, coefficients)
        if not candidate.is_divergence_free():
            raise DivergenceError(
                f"field is not divergence-free (max |k.u| = {candidate.divergence_violation():.3e})"
            )
        return cls(grid, candidate.coefficients, divergence_free=True)

    @property
    def components(self):
        return (
            SpectralScalar(self.grid, self.coefficients[0]),
            SpectralScalar(self.grid, self.coefficients[1]),
        )

    def divergence_violation(self):
        k1, k2 = self.grid.wavenumbers
        return float(np.max(np.abs(k1 * self.coefficients[0] + k2 * self.coefficients[1])))

    def is_divergence_free(self, tolerance=DIVERGENCE_TOLERANCE):
        norm = float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))
        return self.divergence_violation() <= tolerance * norm

    def is_finite(self):
        return bool(np.all(np.isfinite(self.coefficients)))

    def to_physical(self):
        """Physical samples of shape (2, n, n)"""
        n = self.grid.n
        return np.real(np.fft.ifft2(self.coefficients, axes=(-2, -1))) * (n * n)

    def max_speed(self):
        samples = self.to_physical()
        return float(np.max(np.hypot(samples[0], samples[1])))

    def _combine(self, other, op):
        self.grid.check_same(other.grid)
        return SpectralVectorField(
            self.grid,
            op(self.coefficients, other.coefficients),
            self.divergence_free and other.divergence_free,
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, factor):
        return SpectralVectorField(self.grid, self.coefficients * factor, self.divergence_free)

    __rmul__ = __mul__

    def __truediv__(self, divisor):
        return SpectralVectorField(self.grid, self.coefficients / divisor, self.divergence_free)

    def __neg__(self):
        return SpectralVectorField(self.grid, -self.coefficients, self.divergence_free)


def forward_transform(samples, grid):
    """Transform real samples to a mean-zero scalar

    Returns ``(scalar, mean)``; the removed mean is reported separately.
    """
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise GridMismatchError(f"samples of shape {samples.shape} do not fit grid n={grid.n}")
    if np.iscomplexobj(samples):
        if np.any(np.imag(samples) != 0):
            raise InvalidParameterError("samples must be real-valued")
        samples = np.real(samples)
    coefficients = np.fft.fft2(samples) / grid.n ** 2
    mean = float(np.real(coefficients[0, 0]))
    return SpectralScalar(grid, coefficients), mean


def forward_vector_transform(samples, grid):
    """Vector version of ``forward_transform``; returns ``(field, (mean1, mean2))``"""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (2,) + grid.shape:
        raise GridMismatchError(f"samples of shape {samples.shape} do not fit grid n={grid.n}")
    first, mean1 = forward_transform(samples[0], grid)
    second, mean2 = forward_transform(samples[1], grid)
    return SpectralVectorField.from_components(first, second), (mean1, mean2)


def inverse_transform(scalar, mean=0.0):
    n = scalar.grid.n
    return np.real(np.fft.ifft2(scalar.coefficients)) * (n * n) + mean
