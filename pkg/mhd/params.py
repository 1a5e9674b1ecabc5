"""Physical parameters and their Elsasser form"""
import logging
import math
from dataclasses import dataclass

from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)


def _require_positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParameterError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class DimensionalParams:
    """Dimensional MHD data: viscosity, magnetic diffusivity, density, permeability, scales"""

    nu: float
    lam: float
    rho0: float
    mu0: float
    length: float
    velocity: float

    def __post_init__(self):
        _require_positive(
            nu=self.nu, lam=self.lam, rho0=self.rho0, mu0=self.mu0,
            length=self.length, velocity=self.velocity,
        )

    @property
    def reynolds(self):
        return self.velocity * self.length / self.nu

    @property
    def magnetic_reynolds(self):
        return self.velocity * self.length / self.lam

    @property
    def first_eigenvalue(self):
        """Smallest eigenvalue of -Laplacian on [0, L]^2"""
        return 4.0 * math.pi ** 2 / self.length ** 2


@dataclass(frozen=True)
class ElsasserParams:
    Re: float
    Rm: float
    alpha: float
    beta: float
    swapped: bool

    @property
    def alpha_minus_beta(self):
        return self.alpha - self.beta

    @property
    def advection_sign(self):
        """+1 for w = u - b; -1 when w = b - u, which reverses the transport term of the v equation only"""
        return -1.0 if self.swapped else 1.0

    @property
    def window(self):
        """The analysis time scale T = 1 / (pi^2 (alpha - beta))"""
        return 1.0 / (math.pi ** 2 * self.alpha_minus_beta)

    def as_dict(self):
        return {
            'Re': self.Re, 'Rm': self.Rm, 'alpha': self.alpha, 'beta': self.beta,
            'swapped': self.swapped,
        }


def derive_elsasser_params(Re, Rm):
    _require_positive(Re=Re, Rm=Rm)
    inverse_re = 1.0 / Re
    inverse_rm = 1.0 / Rm
    return ElsasserParams(
        Re=float(Re),
        Rm=float(Rm),
        alpha=0.5 * (inverse_re + inverse_rm),
        beta=abs(0.5 * (inverse_re - inverse_rm)),
        swapped=inverse_re < inverse_rm,
    )
