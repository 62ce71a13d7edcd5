"""Stability classification of the flat interface.

Only the ratio jump(rho) * gamma_a / sigma matters: the flat interface is
exponentially stable when it is below the first nontrivial Neumann eigenvalue
lambda_1 (or the jump is non-positive), unstable above, and has a zero
eigenvalue exactly when the ratio is a Neumann eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError
from .geometry import CrossSection, Kind, NeumannMode, bessel_jprime_zero, neumann_eigenvalues

NEUTRAL_RTOL = 1e-12


@dataclass(frozen=True)
class FluidPair:
    """Material data; phase 1 is the lower fluid, phase 2 the upper one."""

    rho1: float
    rho2: float
    mu1: float
    mu2: float
    sigma: float
    gamma_a: float

    def __post_init__(self):
        for name in ("rho1", "rho2", "mu1", "mu2", "sigma", "gamma_a"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise DomainError(f"{name} must be a number, got {value!r}") from None
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def rho_jump(self):
        return self.rho2 - self.rho1

    @property
    def load(self):
        """jump(rho) * gamma_a, the destabilising gravity load."""
        return self.rho_jump * self.gamma_a

    def with_sigma(self, sigma):
        return FluidPair(self.rho1, self.rho2, self.mu1, self.mu2, sigma, self.gamma_a)


class Classification(str, Enum):
    EXPONENTIALLY_STABLE = "stable"
    UNSTABLE = "unstable"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class StabilityVerdict:
    classification: Classification
    sigma_c: float | None
    margins: list[tuple[tuple[int, ...], float]] = field(default_factory=list)
    neutral_modes: list[NeumannMode] = field(default_factory=list)


def critical_surface_tension(fp, cs):
    """jump(rho) gamma_a / lambda_1, or None when the jump is not positive."""
    if fp.rho_jump <= 0:
        return None
    lam1 = neumann_eigenvalues(cs, 1)[0].eigenvalue
    return fp.load / lam1


def critical_radius(fp, cs=None):
    """Disk radius at which the flat interface loses stability at fixed sigma.

    R_c = sqrt(sigma * j'_{1,1}^2 / (jump(rho) gamma_a)); radii below R_c are
    stable.  Only meaningful for a positive density jump.
    """
    if cs is not None and cs.kind is not Kind.DISK:
        raise DomainError("critical radius is defined for disk cross-sections only")
    if fp.rho_jump <= 0:
        raise DomainError("no finite critical radius: jump(rho) <= 0 is stable for every radius")
    j11 = bessel_jprime_zero(1, 1)
    return math.sqrt(fp.sigma * j11 * j11 / fp.load)


def classify(fp, cs, modes=8):
    """Classify the flat interface and report sigma*lambda_m - jump(rho)*gamma_a
    for the first ``modes`` Neumann eigenvalues."""
    if modes < 1:
        raise DomainError("need at least one mode")
    spectrum = neumann_eigenvalues(cs, modes)
    load = fp.load
    margins = [(mode.index, fp.sigma * mode.eigenvalue - load) for mode in spectrum]
    sigma_c = critical_surface_tension(fp, cs)
    if fp.rho_jump <= 0:
        return StabilityVerdict(Classification.EXPONENTIALLY_STABLE, None, margins)

    def is_neutral(mode):
        scale = max(abs(fp.sigma * mode.eigenvalue), abs(load))
        return abs(fp.sigma * mode.eigenvalue - load) <= NEUTRAL_RTOL * scale

    neutral = [mode for mode in spectrum if is_neutral(mode)]
    if neutral:
        return StabilityVerdict(Classification.NEUTRAL, sigma_c, margins, neutral)
    ratio = load / fp.sigma
    lam1 = spectrum[0].eigenvalue
    cls = Classification.EXPONENTIALLY_STABLE if ratio < lam1 else Classification.UNSTABLE
    return StabilityVerdict(cls, sigma_c, margins)


def radius_verdict(fp, R, modes=4):
    """Classification of a disk of radius R at the data ``fp``."""
    return classify(fp, CrossSection.disk(R), modes).classification
