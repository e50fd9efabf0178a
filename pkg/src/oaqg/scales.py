"""Nondimensionalization used by the solver internals.

Lengths scale by ell = L/pi (so the zonal coordinate runs over [0, pi]),
time by 1/f0, streamfunction by ell^2 f0, and temperature by
temp_coeff * ell^2 f0, which makes the nondimensional atmospheric temperature
anomaly equal to minus the nondimensional baroclinic streamfunction
coefficient for coefficient. Energy-like quadratic forms scale by
ell^4 f0^2 and their time derivatives by ell^4 f0^3.

State vectors and checkpoints carry nondimensional coefficients; every
public diagnostic converts back to SI through one of these factors exactly
once, at the edge.
"""

from dataclasses import dataclass
import math

from .params import PhysicalParams, DerivedParams


@dataclass(frozen=True)
class Scales:
    ell: float    # length, m
    f0: float     # frequency, s^-1
    psi: float    # streamfunction, m^2 s^-1
    temp: float   # temperature, K

    @property
    def time(self) -> float:
        """Seconds per nondimensional time unit."""
        return 1.0 / self.f0

    @property
    def energy(self) -> float:
        """SI value of a unit nondimensional energy form, m^4 s^-2."""
        return self.ell ** 4 * self.f0 ** 2

    @property
    def power(self) -> float:
        """SI value of a unit nondimensional energy tendency, m^4 s^-3."""
        return self.ell ** 4 * self.f0 ** 3


def build_scales(params: PhysicalParams, derived: DerivedParams) -> Scales:
    ell = params.L / math.pi
    psi = ell ** 2 * params.f0
    return Scales(ell=ell, f0=params.f0, psi=psi,
                  temp=derived.temp_coeff * psi)
