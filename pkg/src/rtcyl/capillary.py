"""Capillary equilibria F(alpha, h) = div(grad h / sqrt(1 + |grad h|^2)) + alpha h
and the pitchfork branch bifurcating from (lambda_1, 0).

Both cross-sections share one discrete form

    F(alpha, h) = sum_c Div_c f_c(G h) + alpha h,   f(v) = v / sqrt(1 + |v|^2),

with dense gradient matrices ``G_c`` (unknowns -> physical points) and
divergence matrices ``Div_c`` (physical points -> unknowns).  On the interval
the unknowns are nodal values on a Chebyshev-Lobatto grid; on the disk they
are Fourier coefficients in phi times values at the positive nodes of a
parity-folded Chebyshev grid on [-R, R] (the origin is not a node and
eta_m(-r) = (-1)^m eta_m(r) is built in).

Neumann conditions replace the field rows at the boundary nodes, and the
mean-zero constraint is a bordered row with a Lagrange multiplier c acting
on the field rows (the constant of the physical problem).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as npcheb

from .chebyshev import ChebGrid, diff_matrix, lobatto_nodes
from .errors import ConvergenceError, DomainError, SolverError
from .geometry import CrossSection, Kind, bessel_j_array, bessel_jprime_zero, neumann_eigenvalues

NEWTON_TOL = 1e-11
NEWTON_MAXIT = 30


def _flux(v_sq):
    """1/W and 1/W^3 with W = sqrt(1 + |v|^2); rejects overflow."""
    W2 = 1.0 + v_sq
    if not np.all(np.isfinite(W2)):
        raise DomainError("gradient too large: 1 + |grad h|^2 is not finite")
    inv = 1.0 / np.sqrt(W2)
    return inv, inv**3


class _Discretization:
    """Shared machinery; subclasses fill in the matrices."""

    cs: CrossSection
    n: int
    G: list
    Div: list
    bc: np.ndarray
    bc_nodes: np.ndarray
    weights: np.ndarray
    mean_weights: np.ndarray
    const: np.ndarray
    perm: np.ndarray
    sign: np.ndarray

    def _finish(self):
        self.field_rows = np.setdiff1d(np.arange(self.n), self.bc_nodes)
        self.lambda1 = neumann_eigenvalues(self.cs, 1)[0].eigenvalue
        self.u1, self.u2 = self._kernel_modes()

    # reflection and inner products
    def reflect(self, h):
        return self.sign * h[self.perm]

    def _reflect_matrix(self, A):
        return self.sign[:, None] * A[self.perm][:, self.perm] * self.sign[self.perm][None, :]

    def inner(self, a, b):
        return float(np.dot(self.weights * a, b))

    def norm(self, a):
        return math.sqrt(max(self.inner(a, a), 0.0))

    def mean(self, h):
        return float(self.mean_weights @ h) / self.cs.area()

    def amplitude(self, h):
        """Lyapunov-Schmidt coordinate s = (h | u_1)."""
        return self.inner(h, self.u1)

    def field(self, values):
        return HeightField(self, np.array(values, dtype=float))

    def zero(self):
        return self.field(np.zeros(self.n))

    # the operator
    def _raw_residual(self, alpha, h):
        grads = [G @ h for G in self.G]
        with np.errstate(over="ignore"):
            sq = sum(g * g for g in grads)
        inv, _ = _flux(sq)
        out = alpha * h
        for D, g in zip(self.Div, grads):
            out = out + D @ (g * inv)
        return out

    def _raw_jacobian(self, alpha, h):
        grads = [G @ h for G in self.G]
        with np.errstate(over="ignore"):
            sq = sum(g * g for g in grads)
        inv, inv3 = _flux(sq)
        J = alpha * np.eye(self.n)
        for c, D in enumerate(self.Div):
            inner = inv[:, None] * self.G[c]
            for d, G in enumerate(self.G):
                inner = inner - (grads[c] * grads[d] * inv3)[:, None] * G
            J = J + D @ inner
        return J

    def residual(self, alpha, h):
        """Field residual, symmetrised so that reflection equivariance is exact."""
        h = np.asarray(h, dtype=float)
        return 0.5 * (self._raw_residual(alpha, h) + self.reflect(self._raw_residual(alpha, self.reflect(h))))

    def jacobian(self, alpha, h):
        h = np.asarray(h, dtype=float)
        Jr = self._raw_jacobian(alpha, self.reflect(h))
        return 0.5 * (self._raw_jacobian(alpha, h) + self._reflect_matrix(Jr))

    def linear_apply(self, alpha, dh):
        """(Delta + alpha) dh, assembled from the same matrices."""
        return alpha * dh + sum(D @ (G @ dh) for D, G in zip(self.Div, self.G))

    def sup_norm(self, h):
        return float(np.max(np.abs(self.physical(h))))

    # bordered system -----------------------------------------------------
    def bordered_residual(self, alpha, h, c):
        F = self.residual(alpha, h)
        return np.concatenate([(F + c * self.const)[self.field_rows], self.bc @ h, [self.mean_weights @ h]])

    def bordered_jacobian(self, alpha, h, J=None):
        J = self.jacobian(alpha, h) if J is None else J
        top = np.hstack([J[self.field_rows], self.const[self.field_rows, None]])
        mid = np.hstack([self.bc, np.zeros((self.bc.shape[0], 1))])
        bot = np.concatenate([self.mean_weights, [0.0]])[None, :]
        return np.vstack([top, mid, bot])

    def constrained_eigs(self, alpha, h, active=None):
        """Eigenvalues of D_hF on mean-zero fields obeying the Neumann rows.

        Generalised pencil of the bordered Jacobian against the identity on
        the field rows; constraint rows give infinite eigenvalues, which are
        dropped.  Sorted by magnitude.
        """
        vals, _ = self._constrained_eig(alpha, h, active, vectors=False)
        return vals

    def _constrained_eig(self, alpha, h, active=None, vectors=True):
        K = self.bordered_jacobian(alpha, h)
        M = np.zeros_like(K)
        M[np.arange(len(self.field_rows)), self.field_rows] = 1.0
        if active is not None:
            rows, cols = self._active_rows_cols(active)
            K, M = K[np.ix_(rows, cols)], M[np.ix_(rows, cols)]
        try:
            res = sla.eig(K, M, right=vectors, homogeneous_eigvals=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise SolverError("eigensolve of the bordered Jacobian failed") from exc
        w, V = (res if vectors else (res, None))
        a, b = w
        bound = 1e4 * np.linalg.norm(K, 1)
        ok = b != 0
        lam = np.full(a.shape, np.inf, dtype=complex)
        lam[ok] = a[ok] / b[ok]
        keep = np.isfinite(lam) & (np.abs(lam) < bound)
        lam = lam[keep]
        order = np.argsort(np.abs(lam), kind="stable")
        lam = lam[order]
        if vectors:
            V = V[:, keep][:, order]
        return lam, V

    def _active_rows_cols(self, active):
        """Row/column subsets of the bordered system for an invariant sector."""
        active = np.asarray(active)
        fr = np.flatnonzero(np.isin(self.field_rows, active))
        nb = self.bc.shape[0]
        bc_keep = np.flatnonzero(np.any(self.bc[:, active] != 0, axis=1))
        rows = np.concatenate([fr, len(self.field_rows) + bc_keep, [len(self.field_rows) + nb]])
        cols = np.concatenate([active, [self.n]])
        return rows, cols


class IntervalDisc(_Discretization):
    """Nodal Chebyshev-Lobatto discretisation of (-R, R)."""

    def __init__(self, R=1.0, N=32):
        if N < 8:
            raise DomainError(f"need N >= 8, got {N}")
        self.cs = CrossSection.interval(R)
        self.R = float(R)
        self.N = int(N)
        self.grid = ChebGrid(-R, R, N, antisymmetrize=True)
        self.x = self.grid.x
        self.n = N + 1
        D = self.grid.D
        self.G = [D]
        self.Div = [D]
        self.bc = D[[0, N]]
        self.bc_nodes = np.array([0, N])
        self.weights = self.grid.w
        self.mean_weights = self.grid.w
        self.const = np.ones(self.n)
        self.perm = np.arange(self.n)[::-1].copy()
        self.sign = np.ones(self.n)
        self._finish()

    def _kernel_modes(self):
        u = np.cos(math.pi * (self.x + self.R) / (2 * self.R)) / math.sqrt(self.R)
        return u, None

    def physical(self, h):
        return np.asarray(h)

    def from_function(self, f):
        return self.field(f(self.x))


class DiskDisc(_Discretization):
    """Fourier x parity-folded Chebyshev discretisation of the disk B_R.

    Harmonics: cos(m phi) for 0 <= m <= M, sin(m phi) for 1 <= m <= M.  The
    unknown (harmonic q, radial node j) sits at index q * Nh + j; radial nodes
    r_j are the Nh positive Lobatto points of degree 2 Nh - 1 on [-R, R],
    ascending, so r_{Nh-1} = R.
    """

    def __init__(self, R=1.0, M=8, Nh=10, L=64):
        if M < 1 or Nh < 6:
            raise DomainError(f"need M >= 1 and Nh >= 6, got M={M}, Nh={Nh}")
        if L <= 2 * M:
            raise DomainError(f"need more than 2M = {2 * M} angles, got {L}")
        self.cs = CrossSection.disk(R)
        self.R, self.M, self.Nh, self.L = float(R), int(M), int(Nh), int(L)
        deg = 2 * Nh - 1
        full = lobatto_nodes(deg) * R
        Dfull = diff_matrix(deg) / R
        pos = np.arange(Nh, 2 * Nh)
        mirror = deg - pos
        self.r = full[pos]
        self.harmonics = [(m, "c") for m in range(M + 1)] + [(m, "s") for m in range(1, M + 1)]
        H = len(self.harmonics)
        self.n = H * Nh
        self.phi = 2 * math.pi * np.arange(L) / L
        Dp = {p: Dfull[np.ix_(pos, pos)] + p * Dfull[np.ix_(pos, mirror)] for p in (1, -1)}
        self._Dp = Dp

        S = np.empty((L, H))
        Sphi = np.empty((L, H))
        A = np.empty((H, L))
        for q, (m, kind) in enumerate(self.harmonics):
            if kind == "c":
                S[:, q] = np.cos(m * self.phi)
                Sphi[:, q] = -m * np.sin(m * self.phi)
                A[q] = S[:, q] * ((1.0 if m == 0 else 2.0) / L)
            else:
                S[:, q] = np.sin(m * self.phi)
                Sphi[:, q] = m * np.cos(m * self.phi)
                A[q] = S[:, q] * (2.0 / L)
        self.S = S
        T = np.zeros((H, L))
        index = {hm: q for q, hm in enumerate(self.harmonics)}
        for q, (m, kind) in enumerate(self.harmonics):
            if m == 0:
                continue
            if kind == "c":
                T[q] = m * A[index[(m, "s")]]
            else:
                T[q] = -m * A[index[(m, "c")]]

        P = Nh * L
        Gr = np.zeros((P, self.n))
        Gphi = np.zeros((P, self.n))
        Dr = np.zeros((self.n, P))
        Dphi = np.zeros((self.n, P))
        rows_phys = np.arange(Nh)[:, None] * L + np.arange(L)[None, :]  # (j, l) -> index
        bc = np.zeros((H, self.n))
        for q, (m, kind) in enumerate(self.harmonics):
            D = Dp[1 if m % 2 == 0 else -1]
            cols = q * Nh + np.arange(Nh)
            for j in range(Nh):
                Gr[rows_phys[j], q * Nh:(q + 1) * Nh] = np.outer(S[:, q], D[j])
                Gphi[rows_phys[j], q * Nh + j] = Sphi[:, q] / self.r[j]
                # Div_r: (1/r_i) D_p[i, j] r_j A[q, l]
                Dr[cols, rows_phys[j][0]:rows_phys[j][-1] + 1] = np.outer(D[:, j] * self.r[j] / self.r, A[q])
                Dphi[q * Nh + j, rows_phys[j][0]:rows_phys[j][-1] + 1] = T[q] / self.r[j]
            bc[q] = 0.0
            bc[q, cols] = D[Nh - 1]
        self.G = [Gr, Gphi]
        self.Div = [Dr, Dphi]
        self.bc = bc
        self.bc_nodes = np.arange(H) * Nh + (Nh - 1)

        wr = self._radial_weights(full, deg, pos, mirror)
        self.radial_weights = wr
        hw = np.array([2 * math.pi if m == 0 else math.pi for m, _ in self.harmonics])
        self.weights = np.kron(hw, wr)
        self.mean_weights = np.zeros(self.n)
        self.mean_weights[:Nh] = 2 * math.pi * wr
        self.const = np.zeros(self.n)
        self.const[:Nh] = 1.0
        self.perm = np.arange(self.n)
        self.sign = np.array([1.0 if k == "c" else -1.0 for _, k in self.harmonics]).repeat(Nh)
        self.cos_sector = np.arange((M + 1) * Nh)
        self._finish()

    def _radial_weights(self, full, deg, pos, mirror):
        """w_j with sum_j w_j f(r_j) = int_0^R f(r) r dr for even f."""
        t = full / self.R
        V = npcheb.chebvander(t, deg)
        mom = np.empty(deg + 1)
        for k in range(deg + 1):
            c = np.zeros(k + 1)
            c[k] = 1.0
            mom[k] = npcheb.chebval(1.0, npcheb.chebint(npcheb.chebmulx(c), lbnd=0))
        omega = np.linalg.solve(V.T, mom) * self.R**2
        return omega[pos] + omega[mirror]

    def harmonic_index(self, m, kind="c"):
        return self.harmonics.index((m, kind))

    def block(self, h, m, kind="c"):
        q = self.harmonic_index(m, kind)
        return h[q * self.Nh:(q + 1) * self.Nh]

    def _kernel_modes(self):
        j11 = bessel_jprime_zero(1, 1)
        prof = bessel_j_array(1, j11 * self.r / self.R)
        norm = math.sqrt(math.pi * float(self.radial_weights @ (prof * prof)))
        u1 = np.zeros(self.n)
        u2 = np.zeros(self.n)
        q1 = self.harmonic_index(1, "c")
        q2 = self.harmonic_index(1, "s")
        u1[q1 * self.Nh:(q1 + 1) * self.Nh] = prof / norm
        u2[q2 * self.Nh:(q2 + 1) * self.Nh] = prof / norm
        return u1, u2

    def physical(self, h):
        """Values on the (r_j, phi_l) grid, shape (Nh, L)."""
        coef = np.asarray(h).reshape(len(self.harmonics), self.Nh)
        return coef.T @ self.S.T

    def rotate(self, h, phi0):
        """Coefficients of h(r, phi - phi0)."""
        out = np.array(h, dtype=float)
        for m in range(1, self.M + 1):
            a = self.block(h, m, "c")
            b = self.block(h, m, "s")
            c, s = math.cos(m * phi0), math.sin(m * phi0)
            qc, qs = self.harmonic_index(m, "c"), self.harmonic_index(m, "s")
            out[qc * self.Nh:(qc + 1) * self.Nh] = a * c - b * s
            out[qs * self.Nh:(qs + 1) * self.Nh] = b * c + a * s
        return out

    def rotation_generator(self, h):
        """Coefficients of d/dphi h."""
        out = np.zeros(self.n)
        for m in range(1, self.M + 1):
            qc, qs = self.harmonic_index(m, "c"), self.harmonic_index(m, "s")
            a = self.block(h, m, "c")
            b = self.block(h, m, "s")
            out[qc * self.Nh:(qc + 1) * self.Nh] = m * b
            out[qs * self.Nh:(qs + 1) * self.Nh] = -m * a
        return out

    def from_function(self, f):
        """Project f(r, phi) onto the harmonics at the radial nodes."""
        rr, pp = np.meshgrid(self.r, self.phi, indexing="ij")
        vals = f(rr, pp)
        H = len(self.harmonics)
        coef = np.empty((H, self.Nh))
        for q, (m, kind) in enumerate(self.harmonics):
            basis = np.cos(m * self.phi) if kind == "c" else np.sin(m * self.phi)
            coef[q] = vals @ basis * ((1.0 if m == 0 else 2.0) / self.L)
        return self.field(coef.ravel())


def discretization(cs, **kw):
    if cs.kind is Kind.INTERVAL:
        return IntervalDisc(cs.R, **kw)
    return DiskDisc(cs.R, **kw)


@dataclass
class HeightField:
    """A discrete height field: nodal values (interval) or harmonic
    coefficients at radial nodes (disk)."""

    disc: _Discretization
    values: np.ndarray

    @property
    def cs(self):
        return self.disc.cs

    @property
    def mean(self):
        return self.disc.mean(self.values)

    @property
    def amplitude(self):
        return self.disc.amplitude(self.values)

    def norm(self):
        return self.disc.norm(self.values)

    def sup_norm(self):
        return self.disc.sup_norm(self.values)


def _values(h):
    return h.values if isinstance(h, HeightField) else np.asarray(h, dtype=float)


def capillary_residual(alpha, h):
    """(field residual on all unknowns, (Neumann row values, mean value))."""
    disc = h.disc
    v = h.values
    return disc.residual(alpha, v), (disc.bc @ v, disc.mean(v))


def capillary_jacobian_apply(alpha, h, dh):
    return h.disc.jacobian(alpha, h.values) @ _values(dh)


def kernel_mode(cs, disc=None, **kw):
    """L^2-normalised kernel mode(s) of Delta + lambda_1 on the discrete grid:
    (u1, None) on the interval and (u1, u2) on the disk."""
    disc = discretization(cs, **kw) if disc is None else disc
    u1, u2 = disc.u1, disc.u2
    return disc.field(u1), (None if u2 is None else disc.field(u2))


def _newton(fun, jac, z0, tol_fn, maxit=NEWTON_MAXIT):
    z = np.array(z0, dtype=float)
    r = fun(z)
    history = [float(np.max(np.abs(r)))]
    for it in range(maxit):
        if history[-1] <= tol_fn(z):
            return z, r, history
        try:
            dz = sla.solve(jac(z), -r, check_finite=True)
        except (sla.LinAlgError, ValueError):
            raise ConvergenceError("singular Newton matrix", {"history": history, "iterate": z})
        t = 1.0
        while True:
            zn = z + t * dz
            try:
                rn = fun(zn)
                rn_norm = float(np.max(np.abs(rn)))
            except DomainError:
                rn_norm = math.inf
            if rn_norm < history[-1] or t < 1.0 / 64:
                break
            t *= 0.5
        if not math.isfinite(rn_norm):
            raise ConvergenceError("Newton step left the admissible set", {"history": history, "iterate": z})
        z, r = zn, rn
        history.append(rn_norm)
    if history[-1] <= tol_fn(z):
        return z, r, history
    raise ConvergenceError(f"Newton did not converge in {maxit} iterations", {"history": history, "iterate": z})


def newton_solve(alpha, h0, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Solve F(alpha, h) + c = 0 with Neumann rows and zero mean.

    The initial guess is first projected onto the mean-zero space.  Raises
    :class:`ConvergenceError` with the residual history on failure.
    """
    disc = h0.disc
    v = h0.values - disc.mean(h0.values) * disc.const
    n = disc.n

    def fun(z):
        return disc.bordered_residual(alpha, z[:n], z[n])

    def jac(z):
        return disc.bordered_jacobian(alpha, z[:n])

    z, _, _ = _newton(fun, jac, np.concatenate([v, [0.0]]), lambda z: tol * (1 + disc.norm(z[:n])), maxit)
    return disc.field(z[:n])


# --- continuation -----------------------------------------------------------

class StabilityTag(str, Enum):
    UNSTABLE_EQUILIBRIUM = "UnstableEquilibrium"
    INDETERMINATE = "Indeterminate"


@dataclass
class BranchPoint:
    s: float
    alpha: float
    h: HeightField
    residual: float
    multiplier: float
    jacobian_eigs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stability_tag: StabilityTag = StabilityTag.INDETERMINATE

    @property
    def min_jac_eig(self):
        return float(self.jacobian_eigs[0].real) if len(self.jacobian_eigs) else math.nan


class Branch(list):
    """Accepted branch points in tracing order, plus why tracing stopped."""

    stop_reason = "steps"


def _point_diagnostics(disc, alpha, h, n_eigs=6):
    eigs = disc.constrained_eigs(alpha, h)
    return eigs[:n_eigs].real.copy(), eigs


def tag_stability(bp, threshold=1e-8):
    """UnstableEquilibrium when D_hF on mean-zero Neumann fields has an
    eigenvalue above ``threshold``; Indeterminate on the trivial line."""
    disc = bp.h.disc
    if bp.h.norm() == 0.0:
        return StabilityTag.INDETERMINATE
    eigs = disc.constrained_eigs(bp.alpha, bp.h.values)
    if np.max(eigs.real) > threshold:
        return StabilityTag.UNSTABLE_EQUILIBRIUM
    return StabilityTag.INDETERMINATE


def _make_point(disc, alpha, h, c, diagnostics):
    F = disc.residual(alpha, h)
    res = max(
        float(np.max(np.abs((F + c * disc.const)[disc.field_rows]))),
        float(np.max(np.abs(disc.bc @ h))),
        abs(float(disc.mean_weights @ h)),
    )
    hf = disc.field(h)
    bp = BranchPoint(disc.amplitude(h), float(alpha), hf, res, float(c))
    if diagnostics:
        eigs, full = _point_diagnostics(disc, alpha, h)
        bp.jacobian_eigs = eigs
        if np.any(h != 0):
            bp.stability_tag = (
                StabilityTag.UNSTABLE_EQUILIBRIUM if np.max(full.real) > 1e-8 else StabilityTag.INDETERMINATE
            )
    return bp


def branch_trace(cs, direction=1, steps=20, ds=0.01, disc=None, s_max=None, chi=None,
                 diagnostics=True, tol=NEWTON_TOL, **disc_kw):
    """Pseudo-arclength continuation of the bifurcating branch from (lambda_1, 0).

    The first tangent is (direction * u_1, 0); later predictors use the
    secant.  On the disk only the cos sector is continued (this fixes the
    rotation phase).  A failed corrector halves the step, down to ds/64.
    With ``chi`` (a ChiProfile) the trace stops before the first point whose
    height violates the Hanzawa invertibility bound.  With ``s_max`` it stops
    after the first point with |s| >= s_max.
    """
    if not 0 < ds <= 0.1:
        raise DomainError(f"ds must be in (0, 0.1], got {ds}")
    if not 1 <= steps <= 200:
        raise DomainError(f"steps must be in [1, 200], got {steps}")
    if direction not in (1, -1):
        raise DomainError("direction must be +1 or -1")
    disc = discretization(cs, **disc_kw) if disc is None else disc
    n = disc.n
    act = np.arange(n) if cs.kind is Kind.INTERVAL else disc.cos_sector
    rows, cols = disc._active_rows_cols(act)
    na = len(act)
    W = disc.weights[act]

    def expand(x):
        h = np.zeros(n)
        h[act] = x[:na]
        return h

    def full_res(x):
        return disc.bordered_residual(x[na + 1], expand(x), x[na])[rows]

    def full_jac(x):
        h = expand(x)
        K = disc.bordered_jacobian(x[na + 1], h)[np.ix_(rows, cols)]
        return np.hstack([K, disc.bordered_residual_alpha(h)[rows, None]])

    lam1 = disc.lambda1
    x0 = np.zeros(na + 2)
    x0[na + 1] = lam1
    branch = Branch()
    branch.append(_make_point(disc, lam1, expand(x0), 0.0, diagnostics))
    tangent = np.zeros(na + 2)
    tangent[:na] = direction * disc.u1[act]
    tangent /= math.sqrt(np.dot(W * tangent[:na], tangent[:na]) + tangent[na + 1] ** 2)

    def arclength(x, xprev, t, step):
        dh = x[:na] - xprev[:na]
        return np.dot(W * t[:na], dh) + t[na + 1] * (x[na + 1] - xprev[na + 1]) - step

    xprev = x0
    step = ds
    for _ in range(steps):
        while True:
            pred = xprev + step * tangent

            def fun(x, xprev=xprev, t=tangent, step=step):
                return np.concatenate([full_res(x), [arclength(x, xprev, t, step)]])

            def jac(x, t=tangent):
                arc = np.concatenate([W * t[:na], [0.0], [t[na + 1]]])
                return np.vstack([full_jac(x), arc])

            try:
                x, _, _ = _newton(fun, jac, pred, lambda x: tol * (1 + math.sqrt(np.dot(W * x[:na], x[:na]))))
                break
            except ConvergenceError:
                step *= 0.5
                if step < ds / 64:
                    branch.stop_reason = "step failure"
                    return branch
        h = expand(x)
        if chi is not None and 1.0 - 2.0 * disc.sup_norm(h) * chi.dphi_sup <= 0:
            branch.stop_reason = "admissibility"
            return branch
        branch.append(_make_point(disc, x[na + 1], h, x[na], diagnostics))
        sec = x - xprev
        sec[na] = 0.0
        tangent = sec / math.sqrt(np.dot(W * sec[:na], sec[:na]) + sec[na + 1] ** 2)
        xprev = x
        step = min(2 * step, ds)
        if s_max is not None and abs(branch[-1].s) >= s_max:
            branch.stop_reason = "s_max"
            return branch
    branch.stop_reason = "steps"
    return branch


def _bordered_residual_alpha(self, h):
    """d/d alpha of the bordered residual: h on the field rows."""
    return np.concatenate([h[self.field_rows], np.zeros(self.bc.shape[0] + 1)])


_Discretization.bordered_residual_alpha = _bordered_residual_alpha


# --- Lyapunov-Schmidt diagnostics -----------------------------------------

def alpha2_oracle(disc):
    """alpha''(0) of the discrete problem from its third derivative.

    With phi the discrete kernel vector of the bordered Jacobian at
    (lambda_1, 0) scaled to (phi | u_1) = 1 and psi the left kernel vector,
    alpha''(0) = -<psi, F_hhh[phi, phi, phi]> / (3 <psi, F_alpha_h phi>).
    The third derivative of f(v) = v / sqrt(1 + |v|^2) at 0 is
    -3 |v|^2 v, so F_hhh[phi]^3 = sum_c Div_c(-3 |G phi|^2 (G phi)_c).
    On the disk the computation is restricted to the cos sector.
    """
    n = disc.n
    act = np.arange(n) if disc.cs.kind is Kind.INTERVAL else disc.cos_sector
    rows, cols = disc._active_rows_cols(act)
    K = disc.bordered_jacobian(disc.lambda1, np.zeros(n))[np.ix_(rows, cols)]
    U, sv, Vt = np.linalg.svd(K)
    phi_a = Vt[-1]
    psi = U[:, -1]
    phi = np.zeros(n)
    phi[act] = phi_a[:-1]
    phi /= disc.amplitude(phi)
    grads = [G @ phi for G in disc.G]
    sq = sum(g * g for g in grads)
    third = sum(D @ (-3.0 * sq * g) for D, g in zip(disc.Div, grads))
    b3 = np.concatenate([third[disc.field_rows], np.zeros(disc.bc.shape[0] + 1)])[rows]
    ba = disc.bordered_residual_alpha(phi)[rows]
    return float(-(psi @ b3) / (3.0 * (psi @ ba))), float(sv[-1] / sv[-2])


def _l4_quadrature(disc, kind):
    """||grad u_1||^4_{L^4} (kind='grad') or ||u_1||^4_{L^4} (kind='value')."""
    u = disc.u1
    if isinstance(disc, IntervalDisc):
        if kind == "grad":
            return float(disc.weights @ (disc.G[0] @ u) ** 4)
        return float(disc.weights @ u**4)
    # disk: integrate on the physical (r, phi) grid with the even radial weights
    if kind == "grad":
        vals = sum((G @ u).reshape(disc.Nh, disc.L) ** 2 for G in disc.G) ** 2
    else:
        vals = disc.physical(u) ** 4
    return float(disc.radial_weights @ vals.sum(axis=1) * (2 * math.pi / disc.L))


@dataclass
class LSDiagnostics:
    alpha1_fit: float
    alpha2_fit: float
    alpha2_oracle: float
    lambda1: float
    alpha0_fit: float
    candidate_grad: float
    candidate_value: float
    n_points: int


def ls_diagnostics(branch, s_window=0.1):
    """Fit alpha''(0) (even polynomial in s) and alpha'(0) (full polynomial).

    Reports both analytic candidates -||grad u_1||^4_4 / ||u_1||^2 and
    -||u_1||^4_4 / ||u_1||^2 next to the discrete third-derivative oracle.
    """
    pts = [bp for bp in branch if abs(bp.s) <= s_window]
    if len(pts) < 5:
        raise DomainError(f"need >= 5 branch points with |s| <= {s_window}, got {len(pts)}")
    disc = pts[0].h.disc
    s = np.array([bp.s for bp in pts])
    a = np.array([bp.alpha for bp in pts])
    deg_even = min(3, len(pts) - 1)
    Ve = np.stack([s ** (2 * j) for j in range(deg_even)], axis=1)
    ce = np.linalg.lstsq(Ve, a, rcond=None)[0]
    deg = min(6, len(pts) - 1)
    Vf = np.stack([s**j for j in range(deg + 1)], axis=1)
    cf = np.linalg.lstsq(Vf, a, rcond=None)[0]
    unorm2 = disc.inner(disc.u1, disc.u1)
    oracle, _ = alpha2_oracle(disc)
    return LSDiagnostics(
        alpha1_fit=float(cf[1]),
        alpha2_fit=float(2 * ce[1]),
        alpha2_oracle=oracle,
        lambda1=disc.lambda1,
        alpha0_fit=float(ce[0]),
        candidate_grad=-_l4_quadrature(disc, "grad") / unorm2,
        candidate_value=-_l4_quadrature(disc, "value") / unorm2,
        n_points=len(pts),
    )


# --- symmetry ----------------------------------------------------------------

@dataclass(frozen=True)
class Reflection:
    pass


@dataclass(frozen=True)
class Rotation:
    phi0: float


def symmetry_check(alpha, h, op, relative=False):
    """L^2 norm of Gamma F(alpha, h) - F(alpha, Gamma h) for a discrete group action.

    With ``relative`` the defect is divided by the L^2 norm of F(alpha, h).
    """
    disc = h.disc
    v = h.values
    if isinstance(op, Reflection):
        g = disc.reflect
    elif isinstance(op, Rotation):
        if not isinstance(disc, DiskDisc):
            raise DomainError("rotations act on disk cross-sections only")
        g = lambda x: disc.rotate(x, op.phi0)  # noqa: E731
    else:
        raise DomainError(f"unknown group action {op!r}")
    F = disc.residual(alpha, v)
    defect = disc.norm(g(F) - disc.residual(alpha, g(v)))
    if relative:
        scale = disc.norm(F)
        return defect / scale if scale > 0 else defect
    return defect


def branch_zero_mode_check(bp):
    """(min |eig|, next |eig|, alignment angle) of D_hF on the full disk space.

    The angle is between the eigenvector of the smallest eigenvalue and the
    rotation generator d/dphi h, measured in the L^2 inner product.
    """
    disc = bp.h.disc
    if not isinstance(disc, DiskDisc):
        raise DomainError("zero-mode check applies to disk branch points")
    lam, V = disc._constrained_eig(bp.alpha, bp.h.values)
    v = V[:disc.n, 0].real
    g = disc.rotation_generator(bp.h.values)
    gn = disc.norm(g)
    if gn == 0:
        raise DomainError("rotation generator vanishes (h is rotation invariant)")
    proj = disc.inner(v, g) / gn**2
    sin_angle = disc.norm(v - proj * g) / disc.norm(v)
    return float(abs(lam[0])), float(abs(lam[1])), float(math.asin(min(sin_angle, 1.0)))
