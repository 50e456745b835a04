"""vortexlab: models and batch analysis for vortex qubits in thin-film
superconducting resonators.

Library layout:

    core        device description, derived scales, field calibration
    rabi        quantum Rabi spectra, labeling, dispersive shifts
    fitting     damped Gauss-Newton engine and the physics fitters
    energetics  vortex energy landscapes and interaction estimates
    tunneling   finite-difference Schrodinger solver and field sweeps
    jumps       telegraph readout synthesis and analysis
    cli         batch command-line front end
"""

__version__ = "0.1.0"

from .constants import CONSTANTS, PhysicalConstants
from .core import (BUCKLING_RATIO, CoilCalibration, DerivedScales, DeviceModel,
                   VortexRegime, calibrate_coil, derive_scales, esr_field,
                   example_device, flux_bias, vortex_regime)

__all__ = [
    "CONSTANTS", "PhysicalConstants", "BUCKLING_RATIO", "CoilCalibration",
    "DerivedScales", "DeviceModel", "VortexRegime", "calibrate_coil",
    "derive_scales", "esr_field", "example_device", "flux_bias",
    "vortex_regime", "__version__",
]
