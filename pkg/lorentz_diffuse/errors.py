# SPDX-FileCopyrightText: 2026 lorentz-diffuse contributors
#
# SPDX-License-Identifier: MIT

"""
Exception hierarchy for lorentz-diffuse.

Every error carries the process exit code the command line harness reports for it:
2 for invalid input (spec errors), 3 for numeric guards.
"""


class LorentzDiffuseError(Exception):
    """Base class for all errors raised by the package"""

    exit_code = 1


class SpecError(LorentzDiffuseError, ValueError):
    """Malformed or inconsistent experiment specification"""

    exit_code = 2


class ScalingError(SpecError):
    """Scaling parameters outside their admissible range"""


class ProfileError(SpecError):
    """Radial profile table that cannot be used"""


class UnknownExperimentError(SpecError):
    """Subcommand or potential id that does not resolve"""


class NumericGuardError(LorentzDiffuseError, RuntimeError):
    """A numerical precondition or guard was violated"""

    exit_code = 3


class CapacityError(NumericGuardError):
    """Requested sample would exceed the memory guard"""


class IndexRadiusError(NumericGuardError):
    """Neighbor query radius larger than the spatial index cell"""


class StepSizeError(NumericGuardError):
    """Time step too coarse to resolve a soft collision"""


class BoundaryContactError(NumericGuardError):
    """Particle interacts with the boundary of a non-periodic region"""


class SamplingError(NumericGuardError):
    """Rejection sampling did not produce enough samples"""


class ScatteringError(NumericGuardError):
    """Closest-approach root or deflection quadrature failed"""


class KernelError(NumericGuardError):
    """Pseudo-inverse applied to a field with a constant component"""


class NonDecayingError(NumericGuardError):
    """Autocorrelation has not decayed within the sampled window"""


class GridResolutionError(NumericGuardError):
    """Grid too coarse for the requested heat kernel"""


class RelaxationFitError(NumericGuardError):
    """Relaxation trajectory too short for an exponential fit"""


class ProjectionError(NumericGuardError):
    """Mean-field step moved the speed off the velocity sphere"""
