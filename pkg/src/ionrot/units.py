"""Physical constants and the internal unit system.

Internal units are atomic mass units, micrometres and microseconds.  In these
units the trap frequencies, ion separations and protocol durations involved
are all O(1)-O(10), hbar is about 0.0635 and the Coulomb coupling about
1.39e5, which keeps everything comfortably inside double precision.

Derived internal units::

    energy           amu um^2 / us^2   (~1.66e-27 J)
    force            amu um / us^2     (~1.66e-21 N)
    spring constant  amu / us^2        (~1.66e-15 N/m)
    action           amu um^2 / us
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "PhysicalConstants",
    "UnitSystem",
    "CODATA2018",
    "UNITS",
    "HBAR",
    "CC",
    "coulomb_coupling",
    "to_internal",
    "to_si",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 values in SI units."""

    elementary_charge: float = 1.602176634e-19  # C (exact)
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    vacuum_permeability: float = 1.25663706212e-6  # H/m
    speed_of_light: float = 299792458.0  # m/s (exact)
    reduced_planck: float = 6.62607015e-34 / (2.0 * math.pi)  # J s
    atomic_mass_unit: float = 1.66053906660e-27  # kg
    coulomb_coupling: float = field(init=False)  # N m^2

    def __post_init__(self):
        cc = self.elementary_charge**2 / (4.0 * math.pi * self.vacuum_permittivity)
        object.__setattr__(self, "coulomb_coupling", cc)


CODATA2018 = PhysicalConstants()


@dataclass(frozen=True)
class UnitSystem:
    """Scale factors taking internal quantities to SI.

    ``to_si(x, dim) = x * factors[dim]``.
    """

    mass_unit: float = CODATA2018.atomic_mass_unit  # kg
    length_unit: float = 1e-6  # m
    time_unit: float = 1e-6  # s
    factors: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M, L, T = self.mass_unit, self.length_unit, self.time_unit
        energy = M * L**2 / T**2
        factors = {
            "mass": M,
            "length": L,
            "time": T,
            "energy": energy,
            "spring-constant": M / T**2,
            "angular-frequency": 1.0 / T,
            "action": energy * T,
            "force": M * L / T**2,
            "velocity": L / T,
            "quartic-coefficient": M / (T**2 * L**2),
            "coulomb-coupling": energy * L,
        }
        object.__setattr__(self, "factors", factors)

    def factor(self, dimension: str) -> float:
        try:
            return self.factors[dimension]
        except KeyError:
            raise ValueError(
                f"unknown dimension {dimension!r}; expected one of {sorted(self.factors)}"
            ) from None


UNITS = UnitSystem()


def to_internal(value, dimension: str, units: UnitSystem = UNITS):
    """Convert an SI quantity to internal units."""
    return value / units.factor(dimension)


def to_si(value, dimension: str, units: UnitSystem = UNITS):
    """Convert an internal quantity back to SI."""
    return value * units.factor(dimension)


def coulomb_coupling(units: UnitSystem = UNITS) -> float:
    """e^2 / (4 pi eps0) in internal units (amu um^3 / us^2)."""
    return to_internal(CODATA2018.coulomb_coupling, "coulomb-coupling", units)


HBAR = to_internal(CODATA2018.reduced_planck, "action")
CC = coulomb_coupling()
