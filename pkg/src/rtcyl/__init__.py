"""Rayleigh-Taylor stability of two viscous fluids in a vertical cylinder.

Neumann spectra of the cross-section, stability thresholds, per-mode viscous
normal modes, capillary equilibria with their pitchfork branch, and the
Hanzawa-transform defect kernels.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import AdmissibilityError, ConvergenceError, DomainError, RTCylError, SolverError
from .geometry import (
    CrossSection,
    Kind,
    NeumannMode,
    bessel_j,
    bessel_j_prime,
    bessel_jprime_zero,
    fd_neumann_oracle,
    neumann_eigenfunction_eval,
    neumann_eigenvalues,
)
from .thresholds import (
    Classification,
    FluidPair,
    StabilityVerdict,
    classify,
    critical_radius,
    critical_surface_tension,
)

__all__ = [
    "BACKEND",
    "AdmissibilityError",
    "ConvergenceError",
    "DomainError",
    "RTCylError",
    "SolverError",
    "CrossSection",
    "Kind",
    "NeumannMode",
    "bessel_j",
    "bessel_j_prime",
    "bessel_jprime_zero",
    "fd_neumann_oracle",
    "neumann_eigenfunction_eval",
    "neumann_eigenvalues",
    "Classification",
    "FluidPair",
    "StabilityVerdict",
    "classify",
    "critical_radius",
    "critical_surface_tension",
]
