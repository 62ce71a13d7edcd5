"""Cross-sections, Bessel functions and the Neumann-Laplacian spectrum.

Nontrivial Neumann eigenvalues of the interval (-R, R) are (m pi / 2R)^2; on
the disk B_R they are (j'_{m,k} / R)^2 with j'_{m,k} the k-th positive zero of
J'_m, doubly degenerate for m >= 1.  The constant mode (eigenvalue 0) is never
enumerated because height fields are mean-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from ._backend import kernels
from .errors import ConvergenceError, DomainError

MAX_ORDER = 20
MAX_ZERO_INDEX = 20
MAX_MODES = 64


class Kind(str, Enum):
    INTERVAL = "interval"
    DISK = "disk"


@dataclass(frozen=True)
class CrossSection:
    """Horizontal geometry G: the interval (-R, R) or the disk B_R(0)."""

    kind: Kind
    R: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not (math.isfinite(self.R) and self.R > 0):
            raise DomainError(f"radius must be positive and finite, got {self.R!r}")

    @classmethod
    def interval(cls, R=1.0):
        return cls(Kind.INTERVAL, float(R))

    @classmethod
    def disk(cls, R=1.0):
        return cls(Kind.DISK, float(R))

    @property
    def dim(self):
        return 1 if self.kind is Kind.INTERVAL else 2

    def area(self):
        return 2.0 * self.R if self.kind is Kind.INTERVAL else math.pi * self.R**2


@dataclass(frozen=True)
class NeumannMode:
    """A nontrivial Neumann eigenpair of a cross-section.

    ``m`` is the interval index (>= 1) or the azimuthal order (>= 0) on the
    disk; ``k`` is the radial index on the disk and ``None`` on the interval.
    """

    cross_section: CrossSection
    m: int
    k: int | None
    eigenvalue: float
    wavenumber: float
    multiplicity: int

    @property
    def index(self):
        return (self.m,) if self.k is None else (self.m, self.k)


def _check_order(m, x):
    if not isinstance(m, (int, np.integer)) or m < 0 or m > MAX_ORDER:
        raise DomainError(f"Bessel order must be an integer in [0, {MAX_ORDER}], got {m!r}")
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise DomainError(f"Bessel argument must be finite and >= 0, got {x!r}")
    return int(m), x


def bessel_j(m, x):
    """J_m(x) for 0 <= m <= 20 and finite x >= 0.

    Ascending series below x = 6, Miller backward recurrence above (Hankel
    asymptotics beyond x = 1000).
    """
    m, x = _check_order(m, x)
    return kernels.jn(m, x)


def bessel_j_prime(m, x):
    """J'_m(x) from J'_m = (J_{m-1} - J_{m+1}) / 2, with J'_0 = -J_1."""
    m, x = _check_order(m, x)
    return kernels.jn_prime(m, x)


def bessel_j_array(m, x):
    m, _ = _check_order(m, 0.0)
    x = np.ascontiguousarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError("Bessel arguments must be finite and >= 0")
    flat = x.ravel()
    return np.asarray(kernels.jn_array(m, flat)).reshape(x.shape)


def _jprime_zero_estimate(m, k):
    """Asymptotic guess for j'_{m,k}: McMahon for k >= 2, Olver-type for k = 1."""
    if m == 0:
        # zeros of J'_0 are those of J_1
        beta = (k + 0.25) * math.pi
        mu = 4.0
        return beta - (mu - 1) / (8 * beta)
    if k == 1:
        return m + 0.8086165 * m ** (1 / 3) + 0.07249 * m ** (-1 / 3)
    beta = (k + 0.5 * m - 0.75) * math.pi
    mu = 4.0 * m * m
    return beta - (mu + 3) / (8 * beta) - 4 * (7 * mu * mu + 82 * mu - 9) / (3 * (8 * beta) ** 3)


_SCAN_STEP = 0.25


@lru_cache(maxsize=None)
def _jprime_brackets(m, count):
    """Sign-change brackets of J'_m for its first ``count`` positive zeros.

    The scan starts at a point below the first zero (j'_{m,1} > m for m >= 1,
    0 < x < j_{1,1} for m = 0) and runs in steps far smaller than the zero
    spacing, up to past the asymptotic estimate of the last zero.
    """
    lo = max(float(m), 0.5) if m > 0 else 0.5
    if m == 1:
        lo = 0.5  # J'_1 > 0 on (0, j'_{1,1})
    stop = _jprime_zero_estimate(m, count) + 2.0 * math.pi
    x = lo
    f = kernels.jn_prime(m, x)
    brackets = []
    while len(brackets) < count:
        if x > stop + 10 * math.pi:
            raise ConvergenceError(
                f"bracket scan for J'_{m} found {len(brackets)} of {count} zeros",
                {"m": m, "count": count, "scan_end": x, "brackets": list(brackets)},
            )
        xn = x + _SCAN_STEP
        fn = kernels.jn_prime(m, xn)
        if f == 0.0:
            brackets.append((x, x))
        elif (f > 0) != (fn > 0):
            brackets.append((x, xn))
        x, f = xn, fn
    return tuple(brackets)


@lru_cache(maxsize=None)
def bessel_jprime_zero(m, k):
    """The k-th positive zero j'_{m,k} of J'_m (0 <= m <= 20, 1 <= k <= 20).

    Bracketed scan seeded by asymptotics, bisection to 1e-12, one guarded
    Newton polish using J''_m = -J'_m / x - (1 - m^2 / x^2) J_m.
    """
    if not isinstance(m, (int, np.integer)) or not 0 <= m <= MAX_ORDER:
        raise DomainError(f"order must be in [0, {MAX_ORDER}], got {m!r}")
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_ZERO_INDEX:
        raise DomainError(f"zero index must be in [1, {MAX_ZERO_INDEX}], got {k!r}")
    m, k = int(m), int(k)
    a, b = _jprime_brackets(m, k)[k - 1]
    if a != b:
        a, b = kernels.bisect_jprime(m, a, b, 1e-12, 200)
    if b - a > 1e-11:
        raise ConvergenceError(
            f"bisection for j'_({m},{k}) did not shrink the bracket",
            {"m": m, "k": k, "bracket": (a, b)},
        )
    x = 0.5 * (a + b)
    fx = kernels.jn_prime(m, x)
    d2 = -fx / x - (1.0 - m * m / (x * x)) * kernels.jn(m, x)
    if d2 != 0.0:
        xn = x - fx / d2
        if a - 1e-12 <= xn <= b + 1e-12 and abs(kernels.jn_prime(m, xn)) <= abs(fx):
            x = xn
    return x


def neumann_eigenvalues(cs, count):
    """The ``count`` smallest nontrivial Neumann eigenvalues, ascending.

    On the disk a degenerate pair (m >= 1) counts as one entry with
    ``multiplicity == 2``.
    """
    if not isinstance(count, (int, np.integer)) or not 1 <= count <= MAX_MODES:
        raise DomainError(f"count must be in [1, {MAX_MODES}], got {count!r}")
    R = cs.R
    if cs.kind is Kind.INTERVAL:
        modes = []
        for m in range(1, count + 1):
            kappa = m * math.pi / (2 * R)
            modes.append(NeumannMode(cs, m, None, kappa * kappa, kappa, 1))
        return modes
    lattice = []
    for m in range(MAX_ORDER + 1):
        for k in range(1, MAX_ZERO_INDEX + 1):
            j = bessel_jprime_zero(m, k)
            lattice.append((j / R, m, k))
    lattice.sort()
    return [
        NeumannMode(cs, m, k, wn * wn, wn, 1 if m == 0 else 2)
        for wn, m, k in lattice[:count]
    ]


def neumann_eigenfunction_eval(mode, point):
    """Cosine-sector eigenfunction, unnormalised.

    Interval: cos(m pi (x + R) / 2R).  Disk: J_m(j'_{m,k} r / R) cos(m phi)
    with ``point = (x1, x2)`` in Cartesian coordinates.
    """
    cs = mode.cross_section
    R = cs.R
    tol = 1e-12 * R
    if cs.kind is Kind.INTERVAL:
        x = float(np.asarray(point).reshape(-1)[0])
        if abs(x) > R + tol:
            raise DomainError(f"point {x} outside (-{R}, {R})")
        return math.cos(mode.m * math.pi * (x + R) / (2 * R))
    x1, x2 = (float(v) for v in np.asarray(point, dtype=float).reshape(2))
    r = math.hypot(x1, x2)
    if r > R + tol:
        raise DomainError(f"point ({x1}, {x2}) outside the disk of radius {R}")
    phi = math.atan2(x2, x1)
    arg = min(mode.wavenumber * r, mode.wavenumber * R)
    return kernels.jn(mode.m, arg) * math.cos(mode.m * phi)


# --- finite-difference oracle --------------------------------------------

def _interval_fd_raw(R, n):
    """Raw spectrum of the cell-centred Neumann Laplacian on n cells.

    The matrix is G^T G / h^2 with G the (n-1) x n forward difference, so its
    spectrum is that of the positive definite G G^T plus an exact 0.
    """
    h = 2.0 * R / n
    diag = np.full(n - 1, 2.0)
    off = np.full(n - 2, -1.0)
    pos = sla.eigh_tridiagonal(diag, off, eigvals_only=True) / (h * h)
    return np.concatenate(([0.0], np.sort(pos)))


def fd_disk_radial(m, R, n):
    """Eigenvalues of the vertex-centred radial operator for azimuthal order m.

    Grid r_i = i R / n; ghost-point Neumann closure at r = R; at the origin
    the m = 0 row uses Delta u = 2 u'' (even parity), m >= 1 rows drop the
    node (u(0) = 0, odd/vanishing parity).  Returned ascending, raw.
    """
    h = R / n
    r = h * np.arange(n + 1)
    A = np.zeros((n + 1, n + 1))
    for i in range(1, n):
        rp, rm = r[i] + 0.5 * h, r[i] - 0.5 * h
        A[i, i - 1] = -rm / (r[i] * h * h)
        A[i, i + 1] = -rp / (r[i] * h * h)
        A[i, i] = (rp + rm) / (r[i] * h * h) + m * m / (r[i] * r[i])
    A[n, n - 1] = -2.0 / (h * h)
    A[n, n] = 2.0 / (h * h) + m * m / (R * R)
    if m == 0:
        A[0, 0] = 4.0 / (h * h)
        A[0, 1] = -4.0 / (h * h)
    else:
        A = A[1:, 1:]
    ev = np.linalg.eigvals(A)
    return np.sort(ev.real)


def fd_neumann_oracle(cs, n, count, raw=False):
    """Second-order finite-difference approximations of the smallest
    nontrivial Neumann eigenvalues (disk: one entry per degenerate pair)."""
    if n < 16:
        raise DomainError(f"grid size must be >= 16, got {n}")
    if cs.kind is Kind.INTERVAL:
        ev = _interval_fd_raw(cs.R, n)
        return ev[:count] if raw else ev[1:count + 1]
    values = []
    for m in range(MAX_ORDER + 1):
        ev = fd_disk_radial(m, cs.R, n)
        if m == 0:
            ev = ev[1:]
        values.extend(ev[:count])
    values.sort()
    return np.asarray(values[:count])
