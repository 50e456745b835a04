"""CODATA-style physical constants, the single source used by every module.

Derived constants (hbar, Phi0, R_K) are computed from h and e so that the
defining identities hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = 6.62607015e-34       # Planck constant (J s), exact
    e: float = 1.602176634e-19      # elementary charge (C), exact
    mu0: float = 1.25663706212e-6   # vacuum permeability (H/m)
    m_e: float = 9.1093837015e-31   # electron mass (kg)
    k_B: float = 1.380649e-23       # Boltzmann constant (J/K), exact
    mu_B: float = 9.2740100783e-24  # Bohr magneton (J/T)

    @property
    def hbar(self) -> float:
        return self.h / (2.0 * math.pi)

    @property
    def Phi0(self) -> float:
        """Magnetic flux quantum h / 2e (Wb)."""
        return self.h / (2.0 * self.e)

    @property
    def R_K(self) -> float:
        """von Klitzing constant h / e^2 (ohm)."""
        return self.h / self.e**2


CONSTANTS = PhysicalConstants()
