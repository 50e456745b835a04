"""Device description and the closed-form derived scales and thresholds.

Everything downstream (field landscapes, Rabi spectra, tunneling solver)
consumes the scales computed here. All quantities are SI internally:
lengths in meters, fields in tesla, frequencies in Hz, energies in joules.
The CLI layer converts to display units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import CONSTANTS, PhysicalConstants
from .errors import DegenerateFitError, InvalidDeviceError, InvalidParameterError

# Flux bias (in units of phi_S) where a single vortex row splits into two.
BUCKLING_RATIO = 2.48


@dataclass(frozen=True)
class DeviceModel:
    """Geometry and film parameters of one resonator."""

    w: float          # strip width (m)
    t: float          # film thickness (m)
    length: float     # strip length (m)
    xi: float         # coherence length (m)
    lambda_L: float   # London penetration depth (m)
    f_r: float        # bare resonator frequency (Hz)
    Z_r: float        # resonator impedance (ohm)

    def __post_init__(self):
        values = (self.w, self.t, self.length, self.xi, self.lambda_L,
                  self.f_r, self.Z_r)
        if not all(math.isfinite(v) and v > 0 for v in values):
            raise InvalidDeviceError(
                "all device parameters must be positive and finite")
        if self.t >= self.lambda_L:
            raise InvalidDeviceError(
                f"thin-film limit requires t < lambda_L, got t={self.t}, "
                f"lambda_L={self.lambda_L}")
        if self.xi >= self.w:
            raise InvalidDeviceError(
                f"stability threshold requires xi < w, got xi={self.xi}, "
                f"w={self.w}")


@dataclass(frozen=True)
class DerivedScales:
    """Scales derived from a DeviceModel.

    Lambda: thin-film screening length 2 lambda_L^2 / t (m)
    eps0:   single-vortex energy Phi0^2 / (2 pi mu0 Lambda) (J)
    phi_S:  dimensionless flux bias above which vortices are stable
    B_S:    threshold field phi_S Phi0 / w^2 (T)
    """

    Lambda: float
    eps0: float
    phi_S: float
    B_S: float


def example_device() -> DeviceModel:
    """Device used by the bundled example configuration and the test suite."""
    return DeviceModel(w=3e-6, t=24e-9, length=400e-6, xi=7e-9,
                       lambda_L=4e-6, f_r=7.572e9, Z_r=3e3)


def derive_scales(device: DeviceModel,
                  consts: PhysicalConstants = CONSTANTS,
                  eps0_override: float | None = None) -> DerivedScales:
    """Compute the screening length, vortex energy scale and thresholds.

    eps0_override substitutes an externally calibrated single-vortex energy
    (J) for the closed-form value; Lambda, phi_S and B_S are unaffected.
    """
    Lambda = 2.0 * device.lambda_L**2 / device.t
    eps0 = consts.Phi0**2 / (2.0 * math.pi * consts.mu0 * Lambda)
    if eps0_override is not None:
        if not (math.isfinite(eps0_override) and eps0_override > 0):
            raise InvalidParameterError("eps0 override must be positive and finite")
        eps0 = eps0_override
    phi_S = (2.0 / math.pi) * math.log(2.0 * device.w / (math.pi * device.xi))
    B_S = phi_S * consts.Phi0 / device.w**2
    return DerivedScales(Lambda=Lambda, eps0=eps0, phi_S=phi_S, B_S=B_S)


def flux_bias(B: float, w: float, consts: PhysicalConstants = CONSTANTS) -> float:
    """Dimensionless flux bias B w^2 / Phi0; sign follows the sign of B."""
    if not (w > 0):
        raise InvalidParameterError(f"width must be positive, got {w}")
    if not math.isfinite(B):
        raise InvalidParameterError(f"field must be finite, got {B}")
    return B * w**2 / consts.Phi0


class VortexRegime(enum.Enum):
    NO_STABLE_VORTICES = "NoStableVortices"
    SINGLE_ROW = "SingleRow"
    TWO_ROW = "TwoRow"


def vortex_regime(phi: float, phi_S: float) -> VortexRegime:
    """Classify the vortex configuration at flux bias phi.

    Field polarity is symmetric, so only |phi| matters. Boundaries:
    |phi| < phi_S has no stable vortices, phi_S <= |phi| <= 2.48 phi_S is a
    single row, above that the row buckles into two.
    """
    if not (phi_S > 0):
        raise InvalidParameterError(f"phi_S must be positive, got {phi_S}")
    a = abs(phi)
    if a < phi_S:
        return VortexRegime.NO_STABLE_VORTICES
    if a <= BUCKLING_RATIO * phi_S:
        return VortexRegime.SINGLE_ROW
    return VortexRegime.TWO_ROW


def esr_field(f: float, g_factor: float,
              consts: PhysicalConstants = CONSTANTS) -> float:
    """Field (T) bringing g-factor spin-1/2 impurities into resonance at f (Hz)."""
    if g_factor <= 0:
        raise InvalidParameterError(f"g-factor must be positive, got {g_factor}")
    if not (math.isfinite(f) and f >= 0):
        raise InvalidParameterError(f"frequency must be finite and >= 0, got {f}")
    return consts.h * f / (g_factor * consts.mu_B)


@dataclass(frozen=True)
class CoilCalibration:
    """Ordinary least-squares line through (current, field) points."""

    slope: float            # T/A
    intercept: float        # T
    slope_std_error: float
    intercept_std_error: float
    n_points: int


def calibrate_coil(points: Sequence[tuple[float, float]]) -> CoilCalibration:
    """Fit field versus coil current with an ordinary least-squares line.

    Needs at least two points with distinct currents. Standard errors are
    zero when the line is exact (including the two-point case).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DegenerateFitError("need at least two (current, field) points")
    current, field = pts[:, 0], pts[:, 1]
    n = len(current)
    dI = current - current.mean()
    sxx = float(dI @ dI)
    if sxx == 0.0:
        raise DegenerateFitError("all currents identical, slope is unconstrained")
    slope = float(dI @ (field - field.mean())) / sxx
    intercept = float(field.mean() - slope * current.mean())
    residuals = field - (slope * current + intercept)
    dof = n - 2
    if dof > 0:
        sigma2 = float(residuals @ residuals) / dof
    else:
        sigma2 = 0.0
    slope_err = math.sqrt(sigma2 / sxx)
    intercept_err = math.sqrt(sigma2 * (1.0 / n + current.mean()**2 / sxx))
    return CoilCalibration(slope=slope, intercept=intercept,
                           slope_std_error=slope_err,
                           intercept_std_error=intercept_err, n_points=n)
