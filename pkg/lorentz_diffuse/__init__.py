# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
`lorentz_diffuse`
================================================================================

Numerical laboratory for the weak-coupling Lorentz gas with a mean-field background
force: Hamiltonian dynamics through Poisson obstacle fields, the linear Boltzmann jump
process, Landau spherical diffusion, and checks of the diffusive limit.
"""

from lorentz_diffuse.config_scaling import (
    ScalingParams,
    check_regime,
    derive_scales,
    sphere_normalization,
)
from lorentz_diffuse.errors import LorentzDiffuseError, NumericGuardError, SpecError
from lorentz_diffuse.hydrodynamics import DiffusionEstimate
from lorentz_diffuse.spherical_field import SphericalField

__version__ = "0.0.0+auto.0"

__all__ = [
    "DiffusionEstimate",
    "LorentzDiffuseError",
    "NumericGuardError",
    "ScalingParams",
    "SpecError",
    "SphericalField",
    "check_regime",
    "derive_scales",
    "sphere_normalization",
]
