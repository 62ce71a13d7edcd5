"""Viscous normal modes of the flat interface on an interval cross-section.

Each horizontal Neumann mode k = m pi / 2R separates the linearised two-phase
Stokes problem with the ansatz

    u1 = -u(z) sin(k(x+R)),  u2 = w(z) cos(k(x+R)),
    pi = p(z) cos(k(x+R)),   h  = h0 cos(k(x+R)),

leaving, in each phase, lambda rho u = mu (u'' - k^2 u) - k p,
lambda rho w = mu (w'' - k^2 w) - p', w' = k u, with no-slip walls and the
interface rows

    [u] = [w] = 0,  [mu (u' + k w)] = 0,
    -2 [mu w'] + [p] = (jump(rho) gamma_a - sigma k^2) h0,  lambda h0 = w(0).

Jumps are upper (phase 2) minus lower (phase 1).  Chebyshev-Lobatto
collocation per phase turns this into a pencil A x = lambda B x with B
singular on the constraint rows.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as npcheb
from scipy.optimize import brentq, minimize_scalar

from .chebyshev import ChebGrid
from .errors import ConvergenceError, DomainError, SolverError
from .geometry import CrossSection, Kind

INF_FACTOR = 1e8
RESIDUAL_FILTER = 1e-8


@dataclass(frozen=True)
class ModeProblem:
    """One horizontal mode of the two-phase Stokes problem in G x (H1, H2)."""

    fp: object
    cs: CrossSection
    H1: float
    H2: float
    m: int = 1
    N: int = 48

    def __post_init__(self):
        if self.cs.kind is not Kind.INTERVAL:
            raise DomainError("normal modes are implemented for interval cross-sections only")
        if not (self.H1 < 0 < self.H2):
            raise DomainError(f"need H1 < 0 < H2, got H1={self.H1}, H2={self.H2}")
        if int(self.m) < 1:
            raise DomainError(f"mode index must be >= 1, got {self.m}")
        if int(self.N) < 16:
            raise DomainError(f"collocation degree must be >= 16, got {self.N}")

    @property
    def k(self):
        return self.m * math.pi / (2.0 * self.cs.R)

    @property
    def neumann_eigenvalue(self):
        return self.k * self.k

    @property
    def margin(self):
        """sigma k^2 - jump(rho) gamma_a; negative means the mode grows."""
        return self.fp.sigma * self.k**2 - self.fp.load

    @property
    def time_scale(self):
        fp = self.fp
        return min(fp.rho1, fp.rho2) * min(-self.H1, self.H2) ** 2 / max(fp.mu1, fp.mu2)

    @property
    def rate_scale(self):
        return 1.0 / self.time_scale

    @property
    def size(self):
        return 6 * (self.N + 1) + 1

    def grids(self):
        return ChebGrid(self.H1, 0.0, self.N), ChebGrid(0.0, self.H2, self.N)

    def with_sigma(self, sigma):
        return ModeProblem(self.fp.with_sigma(sigma), self.cs, self.H1, self.H2, self.m, self.N)


def _offsets(n1):
    return {"u1": 0, "w1": n1, "p1": 2 * n1, "u2": 3 * n1, "w2": 4 * n1, "p2": 5 * n1, "h": 6 * n1}


def _normal_stress_row(mp):
    return _offsets(mp.N + 1)["w2"]


def assemble_evp(mp, grids=None):
    """Collocated pencil (A, B) of size 6(N+1)+1.

    Unknown order: u1, w1, p1 (lower phase), u2, w2, p2 (upper phase), h0.
    Momentum rows at the end nodes are replaced by wall and interface rows.
    """
    fp = mp.fp
    n1 = mp.N + 1
    N = mp.N
    k = mp.k
    off = _offsets(n1)
    g1, g2 = grids if grids is not None else mp.grids()
    A = np.zeros((mp.size, mp.size))
    B = np.zeros((mp.size, mp.size))
    interior = np.arange(1, N)
    eye = np.eye(n1)
    for tag, g, rho, mu in (("1", g1, fp.rho1, fp.mu1), ("2", g2, fp.rho2, fp.mu2)):
        su, sw, sp = off["u" + tag], off["w" + tag], off["p" + tag]
        L = mu * (g.D2 - k * k * eye)
        ru = su + interior
        rw = sw + interior
        A[ru, su:su + n1] = L[interior]
        A[ru, sp:sp + n1] = -k * eye[interior]
        B[ru, ru] = rho
        A[rw, sw:sw + n1] = L[interior]
        A[rw, sp:sp + n1] = -g.D[interior]
        B[rw, rw] = rho
        rp = sp + np.arange(n1)
        A[rp, sw:sw + n1] = g.D
        A[rp, su + np.arange(n1)] = -k
    # walls: lower phase node 0, upper phase node N
    A[off["u1"], off["u1"]] = 1.0
    A[off["w1"], off["w1"]] = 1.0
    A[off["u2"] + N, off["u2"] + N] = 1.0
    A[off["w2"] + N, off["w2"] + N] = 1.0
    # interface: lower phase node N, upper phase node 0
    i1, i2 = N, 0
    r = off["u1"] + N  # [u] = 0
    A[r, off["u2"] + i2] = 1.0
    A[r, off["u1"] + i1] = -1.0
    r = off["w1"] + N  # [w] = 0
    A[r, off["w2"] + i2] = 1.0
    A[r, off["w1"] + i1] = -1.0
    r = off["u2"]  # [mu (u' + k w)] = 0
    A[r, off["u2"]:off["u2"] + n1] = fp.mu2 * g2.D[i2]
    A[r, off["w2"] + i2] += fp.mu2 * k
    A[r, off["u1"]:off["u1"] + n1] = -fp.mu1 * g1.D[i1]
    A[r, off["w1"] + i1] += -fp.mu1 * k
    r = off["w2"]  # -2 [mu w'] + [p] = (load - sigma k^2) h0
    A[r, off["w2"]:off["w2"] + n1] = -2.0 * fp.mu2 * g2.D[i2]
    A[r, off["w1"]:off["w1"] + n1] = 2.0 * fp.mu1 * g1.D[i1]
    A[r, off["p2"] + i2] = 1.0
    A[r, off["p1"] + i1] = -1.0
    A[r, off["h"]] = -(fp.load - fp.sigma * k * k)
    # kinematic: lambda h0 = w(0)
    A[off["h"], off["w1"] + i1] = 1.0
    B[off["h"], off["h"]] = 1.0
    return A, B


@dataclass
class ModeProfiles:
    """Vertical profiles of one eigenvector (or resolvent solution)."""

    z1: np.ndarray
    z2: np.ndarray
    u1: np.ndarray
    w1: np.ndarray
    p1: np.ndarray
    u2: np.ndarray
    w2: np.ndarray
    p2: np.ndarray
    h: complex


def split_vector(mp, vec, grids=None):
    n1 = mp.N + 1
    off = _offsets(n1)
    g1, g2 = grids if grids is not None else mp.grids()
    part = {name: vec[o:o + n1] for name, o in off.items() if name != "h"}
    h = vec[off["h"]] if len(vec) > off["h"] else 0.0
    return ModeProfiles(g1.x, g2.x, h=h, **part)


@dataclass
class ModeEigenSolution:
    problem: ModeProblem
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    n_discarded: int
    n_infinite: int

    def profiles(self, i):
        return split_vector(self.problem, self.vectors[:, i])

    @property
    def max_real(self):
        return float(self.eigenvalues[0].real) if len(self.eigenvalues) else -math.inf


def _pencil_residuals(A, B, lam, V):
    normA = np.linalg.norm(A, 1)
    normB = np.linalg.norm(B, 1)
    R = A @ V - (B @ V) * lam[None, :]
    res = np.linalg.norm(R, axis=0)
    scale = (normA + np.abs(lam) * normB) * np.linalg.norm(V, axis=0)
    return res / scale


def equilibrate_rows(A, B):
    """Scale each row of the pencil by its largest entry.

    Collocation rows carry entries of order N^4 while boundary rows are O(1);
    without the scaling the normwise backward error of QZ costs several
    digits in the leading eigenvalue at N >= 64.
    """
    s = np.maximum(np.abs(A).max(axis=1), np.abs(B).max(axis=1))
    s[s == 0] = 1.0
    return A / s[:, None], B / s[:, None]


def _filtered_eig(A, B, rate_scale, want_vectors=True):
    A, B = equilibrate_rows(A, B)
    try:
        if want_vectors:
            w, V = sla.eig(A, B, homogeneous_eigvals=True)
        else:
            w = sla.eig(A, B, right=False, homogeneous_eigvals=True)
            V = None
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverError(
            "generalised eigensolve failed",
            {"cond_A": float(np.linalg.cond(A)), "size": A.shape[0]},
        ) from exc
    alpha, beta = w
    finite = beta != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(finite, alpha / np.where(finite, beta, 1.0), np.inf)
    keep = np.isfinite(lam) & (np.abs(lam) <= INF_FACTOR * rate_scale)
    n_inf = int(np.count_nonzero(~finite | ~np.isfinite(lam)))
    return lam, V, keep, n_inf, (A, B)


def solve_spectrum(mp, grids=None):
    """Dense QZ solve of the collocated pencil with spurious-value filtering.

    Values with |lambda| above 1e8 times the viscous rate scale, or with a
    relative pencil residual above 1e-8, are discarded.  Retained values are
    sorted by descending real part; eigenvectors are scaled to h0 = 1 when the
    interface amplitude is not negligible.
    """
    A, B = assemble_evp(mp, grids)
    lam, V, keep, n_inf, (A, B) = _filtered_eig(A, B, mp.rate_scale)
    lam, V = lam[keep], V[:, keep]
    res = _pencil_residuals(A, B, lam, V)
    good = res <= RESIDUAL_FILTER
    n_discarded = int(np.count_nonzero(~keep) + np.count_nonzero(~good))
    lam, V, res = lam[good], V[:, good], res[good]
    order = np.lexsort((-lam.imag, -lam.real))
    lam, V, res = lam[order], V[:, order], res[order]
    hi = mp.size - 1
    for j in range(V.shape[1]):
        v = V[:, j]
        scale = v[hi] if abs(v[hi]) > 1e-12 * np.max(np.abs(v)) else v[np.argmax(np.abs(v))]
        V[:, j] = v / scale
    return ModeEigenSolution(mp, lam, V, res, n_discarded, n_inf)


def energy_terms(mp, lam, prof, grids=None):
    """Quadrature of the kinetic and dissipation integrals of a profile set.

    Returns (kinetic, dissipation) with kinetic = int rho (|u|^2 + |w|^2) and
    dissipation = 1/2 int mu [4k^2 |u|^2 + 4|w'|^2 + 2|u' + k w|^2].
    """
    fp = mp.fp
    k = mp.k
    g1, g2 = grids if grids is not None else mp.grids()
    kin = 0.0
    diss = 0.0
    for g, rho, mu, u, w in ((g1, fp.rho1, fp.mu1, prof.u1, prof.w1), (g2, fp.rho2, fp.mu2, prof.u2, prof.w2)):
        du = g.D @ u
        dw = g.D @ w
        kin += rho * (g.w @ (np.abs(u) ** 2 + np.abs(w) ** 2))
        diss += 0.5 * mu * (g.w @ (4 * k * k * np.abs(u) ** 2 + 4 * np.abs(dw) ** 2 + 2 * np.abs(du + k * w) ** 2))
    return float(kin), float(diss)


def energy_residual(mp, lam, prof, grids=None):
    """Relative defect of lambda*kin + diss + conj(lambda)*(sigma k^2 - load)|h0|^2 = 0."""
    kin, diss = energy_terms(mp, lam, prof, grids)
    surf = mp.margin * abs(prof.h) ** 2
    total = lam * kin + diss + np.conj(lam) * surf
    scale = abs(lam) * kin + diss + abs(lam) * abs(surf)
    return float(abs(total) / scale)


# --- independent fourth-order oracle -------------------------------------

def _vander_diff(n, a, b):
    """Nodes, first and second derivative matrices on [a, b] built from the
    Chebyshev Vandermonde matrix and coefficient-space differentiation."""
    t = npcheb.chebpts2(n + 1)
    V = npcheb.chebvander(t, n)
    coeffs = np.eye(n + 1)
    scale = 2.0 / (b - a)
    mats = []
    for p in (1, 2):
        Vp = npcheb.chebvander(t, n - p) @ npcheb.chebder(coeffs, p, axis=0)
        mats.append(np.linalg.solve(V.T, Vp.T).T * scale**p)
    z = a + (t + 1.0) / scale
    return z, mats[0], mats[1]


def orr_sommerfeld_pencil(mp, N=None):
    """Pencil of the w-only formulation

        mu (w'''' - 2k^2 w'' + k^4 w) = lambda rho (w'' - k^2 w)

    with [w] = [w'] = 0, [mu (w'' + k^2 w)] = 0,
    [mu w''' - 3k^2 mu w' - lambda rho w'] = k^2 (load - sigma k^2) h0,
    lambda h0 = w(0) and clamped walls.

    The fourth-order operator is factored through phi = w'' - k^2 w, so that
    mu (phi'' - k^2 phi) = lambda rho phi; this avoids the spurious modes of
    direct fourth-order collocation.  Unknowns: w1, phi1, w2, phi2, h0.
    """
    N = mp.N if N is None else N
    fp = mp.fp
    k = mp.k
    kk = k * k
    n1 = N + 1
    _, D11, D21 = _vander_diff(N, mp.H1, 0.0)
    _, D12, D22 = _vander_diff(N, 0.0, mp.H2)
    size = 4 * n1 + 1
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    w1, f1, w2, f2, sh = 0, n1, 2 * n1, 3 * n1, 4 * n1
    I = np.eye(n1)
    inner = np.arange(1, N)
    for sw, sf, D2, rho, mu in ((w1, f1, D21, fp.rho1, fp.mu1), (w2, f2, D22, fp.rho2, fp.mu2)):
        A[sw + inner, sw:sw + n1] = (D2 - kk * I)[inner]
        A[sw + inner, sf + inner] = -1.0
        A[sf + inner, sf:sf + n1] = mu * (D2 - kk * I)[inner]
        B[sf + inner, sf + inner] = rho
    top, bot = N, 0
    # clamped walls
    A[w1, w1] = 1.0
    A[f1, w1:w1 + n1] = D11[0]
    A[w2 + N, w2 + N] = 1.0
    A[f2 + N, w2:w2 + n1] = D12[N]
    # [w] = 0, [w'] = 0
    A[w1 + N, w2 + bot] = 1.0
    A[w1 + N, w1 + top] = -1.0
    A[f1 + N, w2:w2 + n1] = D12[bot]
    A[f1 + N, w1:w1 + n1] = -D11[top]
    # [mu (w'' + k^2 w)] = [mu (phi + 2k^2 w)] = 0
    A[w2, f2 + bot] = fp.mu2
    A[w2, w2 + bot] += 2 * kk * fp.mu2
    A[w2, f1 + top] = -fp.mu1
    A[w2, w1 + top] += -2 * kk * fp.mu1
    # normal stress, using w''' - 3k^2 w' = phi' - 2k^2 w'
    r = f2
    A[r, f2:f2 + n1] = fp.mu2 * D12[bot]
    A[r, w2:w2 + n1] = -2 * kk * fp.mu2 * D12[bot]
    A[r, f1:f1 + n1] = -fp.mu1 * D11[top]
    A[r, w1:w1 + n1] += 2 * kk * fp.mu1 * D11[top]
    A[r, sh] = -kk * (fp.load - fp.sigma * kk)
    B[r, w2:w2 + n1] = fp.rho2 * D12[bot]
    B[r, w1:w1 + n1] = -fp.rho1 * D11[top]
    # kinematic
    A[sh, w1 + top] = 1.0
    B[sh, sh] = 1.0
    return A, B


def orr_sommerfeld_oracle(mp, count=None, N=None):
    """Leading eigenvalues of the w-only formulation on its own grid."""
    A, B = orr_sommerfeld_pencil(mp, N)
    lam, V, keep, _, (A, B) = _filtered_eig(A, B, mp.rate_scale)
    lam, V = lam[keep], V[:, keep]
    res = _pencil_residuals(A, B, lam, V)
    lam = lam[res <= RESIDUAL_FILTER]
    lam = lam[np.lexsort((-lam.imag, -lam.real))]
    return lam if count is None else lam[:count]


# --- Neumann-to-Dirichlet scalar ------------------------------------------

@dataclass
class NtDSolution:
    value: float
    lam: float
    g: float
    profiles: ModeProfiles


def ntd_solve(mp, lam, g=1.0, grids=None):
    """Resolvent problem driven by a normal-stress jump g; returns n_k(lam) = w(0)/g."""
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if g == 0:
        raise DomainError("normal-stress datum must be nonzero")
    grids = grids if grids is not None else mp.grids()
    A, B = assemble_evp(mp, grids)
    M = (A - lam * B)[:-1, :-1]
    rhs = np.zeros(M.shape[0])
    rhs[_normal_stress_row(mp)] = g
    try:
        lu = sla.lu_factor(M, check_finite=True)
        x = sla.lu_solve(lu, rhs)
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverError("resolvent matrix is singular", {"lambda": lam}) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("resolvent solve produced non-finite values", {"lambda": lam})
    prof = split_vector(mp, x, grids)
    return NtDSolution(float(prof.w1[-1] / g), float(lam), float(g), prof)


def ntd_value(mp, lam, g=1.0):
    return ntd_solve(mp, lam, g).value


def ntd_energy_residual(mp, sol, grids=None):
    """Relative defect of n_k g^2 = lam*kin + diss."""
    kin, diss = energy_terms(mp, sol.lam, sol.profiles, grids)
    lhs = sol.value * sol.g**2
    rhs = sol.lam * kin + diss
    return abs(lhs - rhs) / abs(rhs)


# --- reduced growth-rate equation -----------------------------------------

@dataclass
class GrowthRateReport:
    rate: float | None
    f0: float | None
    bracket: tuple[float, float] | None = None
    samples: list[tuple[float, float]] = field(default_factory=list)
    extra_sign_changes: list[tuple[float, float]] = field(default_factory=list)


def growth_rate_report(mp, n_samples=48):
    """Smallest positive root of f(lam) = lam + n_k(lam) (sigma k^2 - load).

    f(0) < 0 in the unstable regime and f grows without bound, so a bracket
    exists; the root is refined to 1e-12 relative.  Further sign changes seen
    on a sample grid of the bracket are reported, not claimed to be complete.
    """
    margin = mp.margin
    if margin >= 0:
        return GrowthRateReport(None, None)
    grids = mp.grids()

    def f(lam):
        return lam + ntd_solve(mp, lam, 1.0, grids).value * margin

    f0 = f(0.0)
    hi = 1.01 * ntd_solve(mp, 0.0, 1.0, grids).value * abs(margin)
    samples = [(0.0, f0)]
    for _ in range(60):
        fh = f(hi)
        samples.append((hi, fh))
        if fh > 0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("no sign change found for the growth-rate equation", {"samples": samples})
    rate = brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-12, maxiter=500)
    grid = np.linspace(0.0, hi, n_samples + 1)[1:]
    vals = [f(x) for x in grid]
    samples.extend(zip(grid.tolist(), vals))
    extra = []
    prev_x, prev_f = 0.0, f0
    for x, fx in zip(grid, vals):
        if (fx > 0) != (prev_f > 0) and not (prev_x <= rate <= x):
            extra.append((float(prev_x), float(x)))
        prev_x, prev_f = x, fx
    return GrowthRateReport(float(rate), float(f0), (0.0, float(hi)), samples, extra)


def growth_rate(mp, check=False):
    """Positive growth rate of the mode from the reduced equation, or None.

    With ``check`` the value is compared with the leading pencil eigenvalue
    and a :class:`SolverError` is raised on a mismatch above 1e-6 relative.
    """
    rate = growth_rate_report(mp).rate
    if check and rate is not None:
        lead = solve_spectrum(mp).eigenvalues[0]
        if abs(lead - rate) > 1e-6 * abs(rate):
            raise SolverError("reduced equation and pencil disagree", {"rate": rate, "pencil": complex(lead)})
    return rate


# --- dispersion sweep ------------------------------------------------------

@dataclass
class DispersionRow:
    m: int
    k: float
    lambda_m: float
    margin: float
    max_re_lambda: float | None
    error: str | None = None


DISPERSION_COLUMNS = ("m", "k", "lambda_m", "margin", "max_re_lambda")


def dispersion_sweep(fp, cs, heights, m_max, N=48, workers=1):
    """One row per interval mode m = 1..m_max, in mode order.

    ``margin`` is sigma*lambda_m - jump(rho)*gamma_a.  A failing mode is
    recorded in ``error`` and the sweep continues.
    """
    if not 1 <= m_max <= 64:
        raise DomainError(f"m_max must be in [1, 64], got {m_max}")
    H1, H2 = heights

    def row(m):
        mp = ModeProblem(fp, cs, H1, H2, m, N)
        lam_m = mp.neumann_eigenvalue
        margin = fp.sigma * lam_m - fp.load
        try:
            lead = solve_spectrum(mp).max_real
            return DispersionRow(m, mp.k, lam_m, margin, lead)
        except (SolverError, ConvergenceError) as exc:
            return DispersionRow(m, mp.k, lam_m, margin, None, str(exc))

    modes = range(1, m_max + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, modes))
    return [row(m) for m in modes]


# --- half-space model symbol ----------------------------------------------

def _symbol(lam, k, mu_sum, sigma):
    return 2.0 * mu_sum * lam * math.sqrt(lam + k * k) + sigma * k * k


def model_symbol_rate(k, mu_plus, mu_minus, sigma, n_samples=256):
    """Real roots lam in (-k^2, 0] of 2(mu+ + mu-) lam sqrt(lam + k^2) + sigma k^2 = 0.

    The left side has a single interior minimum; it is located by sampling
    and bounded minimisation, and each side is bisected when the minimum is
    negative.  Returns [] when no root exists.
    """
    for name, v in (("k", k), ("mu_plus", mu_plus), ("mu_minus", mu_minus), ("sigma", sigma)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")
    mu_sum = mu_plus + mu_minus
    kk = k * k

    def f(lam):
        return _symbol(lam, k, mu_sum, sigma)

    grid = np.linspace(-kk, 0.0, n_samples + 1)
    vals = np.array([f(x) for x in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_samples)]
    opt = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14 * kk})
    x_min = float(opt.x) if opt.fun <= vals[i] else float(grid[i])
    f_min = f(x_min)
    if f_min > 0:
        return []
    if f_min == 0:
        return [x_min]
    roots = []
    if f(-kk) > 0:
        roots.append(brentq(f, -kk, x_min, xtol=1e-15 * kk, rtol=1e-15))
    if f(0.0) > 0:
        roots.append(brentq(f, x_min, 0.0, xtol=1e-15 * kk, rtol=1e-15))
    return sorted(roots)


def model_symbol_threshold(k, mu_plus, mu_minus, tol=1e-13):
    """Largest sigma for which :func:`model_symbol_rate` finds a root (bisection on sigma)."""
    lo, hi = 0.0, 1.0
    while model_symbol_rate(k, mu_plus, mu_minus, hi):
        hi *= 2.0
    lo = hi / 2.0 if model_symbol_rate(k, mu_plus, mu_minus, hi / 2.0) else 0.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid > 0 and model_symbol_rate(k, mu_plus, mu_minus, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
