"""Unit system and physical constants.

Internally every quantity is dimensionless with hbar = m0 = a0 = 1, which
forces k_e * e**2 = 1.  SI values only appear at input/output boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Values exactly as printed in the reference text (not CODATA).
K_E = 9.0e9
A0 = 0.52917e-10
E_CHARGE = 1.602176634e-19
HBAR = 1.054571817e-34
EV = E_CHARGE


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants consistent with the Bohr-radius identity.

    ``m0`` is derived from the other constants so that
    ``a0 == hbar**2 / (m0 * k_e * e_charge**2)`` holds to rounding.
    """

    hbar: float = HBAR
    k_e: float = K_E
    e_charge: float = E_CHARGE
    a0: float = A0

    def __post_init__(self):
        for name in ("hbar", "k_e", "e_charge", "a0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def m0(self) -> float:
        return self.hbar**2 / (self.a0 * self.k_e * self.e_charge**2)

    @property
    def E_hartree_like(self) -> float:
        """Energy unit k e^2 / a0 in joules."""
        return self.k_e * self.e_charge**2 / self.a0

    @property
    def time_unit(self) -> float:
        """Time unit m0 a0^2 / hbar in seconds."""
        return self.m0 * self.a0**2 / self.hbar


CONSTANTS = PhysicalConstants()


class UnitMode(str, Enum):
    INTERNAL = "internal"
    SI = "si"


_KINDS = ("length", "time", "energy")


def _scale(kind: str, c: PhysicalConstants) -> float:
    if kind == "length":
        return c.a0
    if kind == "time":
        return c.time_unit
    if kind == "energy":
        return c.E_hartree_like
    raise ValueError(f"unknown quantity kind {kind!r}; expected one of {_KINDS}")


def to_internal(q, kind: str, constants: PhysicalConstants = CONSTANTS):
    """Convert an SI quantity (m, s or J) to internal units."""
    s = _scale(kind, constants)
    return np.asarray(q, dtype=float) / s if np.ndim(q) else float(q) / s


def from_internal(q, kind: str, constants: PhysicalConstants = CONSTANTS):
    """Convert an internal quantity back to SI (m, s or J)."""
    s = _scale(kind, constants)
    return np.asarray(q, dtype=float) * s if np.ndim(q) else float(q) * s


@dataclass(frozen=True)
class UnitSystem:
    """Output unit selection with the three scale factors."""

    mode: UnitMode = UnitMode.INTERNAL
    constants: PhysicalConstants = CONSTANTS

    @classmethod
    def from_name(cls, name: str | None) -> "UnitSystem":
        if name is None or name == "":
            return cls()
        try:
            return cls(UnitMode(name.strip().lower()))
        except ValueError:
            raise ValueError(f"unknown unit system {name!r}; expected 'internal' or 'si'") from None

    @property
    def length(self) -> float:
        return 1.0 if self.mode is UnitMode.INTERNAL else self.constants.a0

    @property
    def time(self) -> float:
        return 1.0 if self.mode is UnitMode.INTERNAL else self.constants.time_unit

    @property
    def energy(self) -> float:
        return 1.0 if self.mode is UnitMode.INTERNAL else self.constants.E_hartree_like

    def label(self, kind: str) -> str:
        if self.mode is UnitMode.INTERNAL:
            return {"length": "a0", "time": "m0*a0^2/hbar", "energy": "k*e^2/a0"}[kind]
        return {"length": "m", "time": "s", "energy": "J"}[kind]


def energy_of_state(n: int) -> float:
    """Bound-state energy E_n = -1/(2 n^2) in internal units."""
    if int(n) != n or n < 1:
        raise ValueError(f"principal quantum number must be a positive integer, got {n!r}")
    return -0.5 / (int(n) ** 2)


def energy_of_state_si(n: int, constants: PhysicalConstants = CONSTANTS) -> float:
    """E_n = -k e^2 / (2 n^2 a0) in joules."""
    return energy_of_state(n) * constants.E_hartree_like


def joules_to_ev(x: float) -> float:
    return x / EV
