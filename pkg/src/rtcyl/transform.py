"""Hanzawa transform Theta_h(x) = x + chi(x_3) h(x') e_3 and the defect kernels
of the transformed two-phase problem.

With c = (chi d_1 h, [chi d_2 h,] chi' h) the Jacobian transpose of the
perturbation is theta'^T = c e_3^T, so

    M_0(h) = theta'^T (I + theta'^T)^{-1} = c e_3^T / (1 + h chi').

The kernels are evaluated pointwise or on tensor grids over one horizontal
coordinate x in (-R, R) and the two vertical layers (H1, 0), (0, H2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chebyshev import ChebGrid
from .errors import AdmissibilityError, ConvergenceError, DomainError


@dataclass(frozen=True)
class ChiProfile:
    """C^2 cut-off: 1 on |s| <= delta/2, 0 on |s| >= delta, quintic smoothstep between."""

    delta: float
    H1: float = -1.0
    H2: float = 1.0

    def __post_init__(self):
        if not (self.H1 < 0 < self.H2):
            raise DomainError(f"need H1 < 0 < H2, got {self.H1}, {self.H2}")
        if not 0 < self.delta < min(-self.H1, self.H2) / 2:
            raise DomainError(f"delta must lie in (0, {min(-self.H1, self.H2) / 2}), got {self.delta}")

    @property
    def dphi_sup(self):
        # max of 30 t^2 (1 - t)^2 on [0, 1] is 15/8, attained at t = 1/2
        return 1.875 / (0.5 * self.delta)

    def _t(self, s):
        half = 0.5 * self.delta
        return np.clip((np.abs(s) - half) / half, 0.0, 1.0)

    def __call__(self, s):
        t = self._t(np.asarray(s, dtype=float))
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)

    def d(self, s):
        s = np.asarray(s, dtype=float)
        t = self._t(s)
        return -np.sign(s) * 30.0 * t * t * (1.0 - t) ** 2 / (0.5 * self.delta)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        t = self._t(s)
        return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (0.5 * self.delta) ** 2


class SurfaceHeight:
    """A height function h(x') with gradient and sup norm.

    ``value`` and ``grad`` take arrays of horizontal points, shape (..., d)
    for d = 1 or 2, and return arrays of shape (...) and (..., d).
    """

    def __init__(self, value, grad, sup, dim=1):
        self._value = value
        self._grad = grad
        self.sup = float(sup)
        self.dim = dim

    def value(self, xp):
        return np.asarray(self._value(np.asarray(xp, dtype=float)), dtype=float)

    def grad(self, xp):
        return np.asarray(self._grad(np.asarray(xp, dtype=float)), dtype=float)

    @classmethod
    def zero(cls, dim=1):
        return cls(lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros(x.shape), 0.0, dim)

    @classmethod
    def from_interval_field(cls, hf):
        """Barycentric interpolant of an interval HeightField and its spectral derivative."""
        disc = hf.disc
        grid = disc.grid
        vals = np.asarray(hf.values)
        dvals = grid.D @ vals
        return cls(
            lambda x: grid.interp(vals, x[..., 0].ravel()).reshape(x.shape[:-1]),
            lambda x: grid.interp(dvals, x[..., 0].ravel()).reshape(x.shape),
            float(np.max(np.abs(vals))),
            1,
        )


def invertibility_margin(chi, h):
    return 1.0 - 2.0 * h.sup * chi.dphi_sup


def check_admissible(chi, h):
    margin = invertibility_margin(chi, h)
    if not margin > 0:
        raise AdmissibilityError(
            f"Hanzawa map not invertible: 2 |h|_inf |chi'|_inf = {1 - margin:.17g} >= 1"
        )
    return margin


@dataclass
class TransformedState:
    """Height, velocity on the fixed grid and optional pressure."""

    chi: ChiProfile
    h: SurfaceHeight
    u: object = None
    pi: object = None

    def __post_init__(self):
        check_admissible(self.chi, self.h)

    @property
    def margin(self):
        return invertibility_margin(self.chi, self.h)


def _split(xbar):
    xbar = np.asarray(xbar, dtype=float)
    return xbar[..., :-1], xbar[..., -1]


def hanzawa_map(chi, h, xbar):
    """Theta_h(xbar) = xbar + chi(xbar_3) h(xbar') e_3."""
    check_admissible(chi, h)
    xbar = np.array(xbar, dtype=float)
    xp, x3 = _split(xbar)
    out = xbar.copy()
    out[..., -1] = x3 + chi(x3) * h.value(xp)
    return out


def hanzawa_inverse(chi, h, y, tol=1e-14, maxit=60):
    """Invert Theta_h by scalar Newton on the vertical coordinate.

    x_3 + chi(x_3) h(y') = y_3 has derivative 1 + chi' h >= 1 - |chi'| |h| > 1/2,
    so the iteration is safeguarded by the bracket [y_3 - |h|, y_3 + |h|].
    """
    check_admissible(chi, h)
    y = np.array(y, dtype=float)
    yp, y3 = _split(y)
    hv = h.value(yp)
    lo = y3 - np.abs(hv)
    hi = y3 + np.abs(hv)
    x3 = y3 - chi(y3) * hv
    for _ in range(maxit):
        g = x3 + chi(x3) * hv - y3
        lo = np.where(g < 0, x3, lo)
        hi = np.where(g > 0, x3, hi)
        step = g / (1.0 + chi.d(x3) * hv)
        xn = x3 - step
        outside = (xn < lo) | (xn > hi)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        if np.all(np.abs(xn - x3) <= tol * (1.0 + np.abs(y3))):
            x3 = xn
            break
        x3 = xn
    else:
        raise ConvergenceError("inverse Hanzawa iteration did not converge", {"x3": x3})
    out = y.copy()
    out[..., -1] = x3
    return out


def _c_vector(chi, h, xbar):
    xp, x3 = _split(xbar)
    phi = chi(x3)
    grad = h.grad(xp)
    c = np.concatenate([phi[..., None] * grad, (chi.d(x3) * h.value(xp))[..., None]], axis=-1)
    return c


def theta_prime_T(chi, h, xbar):
    """theta_h'^T: zero except the last column, which is c."""
    c = _c_vector(chi, h, np.asarray(xbar, dtype=float))
    n = c.shape[-1]
    T = np.zeros(c.shape + (n,))
    T[..., :, n - 1] = c
    return T


def m0_matrix(chi, h, xbar):
    """M_0(h) = c e_3^T / (1 + h chi') at the point(s) xbar (2-D or 3-D)."""
    check_admissible(chi, h)
    c = _c_vector(chi, h, np.asarray(xbar, dtype=float))
    n = c.shape[-1]
    M = np.zeros(c.shape + (n,))
    M[..., :, n - 1] = c / (1.0 + c[..., -1:])
    return M


class LayerGrid:
    """Tensor grid (x, z) on (-R, R) x (H1, 0) and (-R, R) x (0, H2).

    Fields are per phase arrays of shape (nx + 1, nz + 1); velocity fields
    are pairs (u_x, u_z) per phase.
    """

    def __init__(self, R=1.0, H1=-1.0, H2=1.0, nx=24, nz=24):
        if not (H1 < 0 < H2):
            raise DomainError(f"need H1 < 0 < H2, got {H1}, {H2}")
        self.R, self.H1, self.H2 = float(R), float(H1), float(H2)
        self.gx = ChebGrid(-R, R, nx, antisymmetrize=True)
        self.gz = (ChebGrid(H1, 0.0, nz), ChebGrid(0.0, H2, nz))
        self.x = self.gx.x

    def mesh(self, phase):
        return np.meshgrid(self.x, self.gz[phase].x, indexing="ij")

    def sample(self, f):
        """Evaluate f(x, z) on both phases."""
        return tuple(f(*self.mesh(p)) for p in (0, 1))

    def dz(self, field, phase):
        return field @ self.gz[phase].D.T

    def dx(self, field):
        return self.gx.D @ field


def _height_on_grid(grid, h):
    xp = grid.x[:, None]
    return h.value(xp), h.grad(xp)[:, 0]


def divergence_defect(grid, u, h, chi):
    """(M_0(h) grad | u) = sum_i c_i d_3 u_i / (1 + h chi') on each phase."""
    check_admissible(chi, h)
    hv, hx = _height_on_grid(grid, h)
    out = []
    for p in (0, 1):
        ux, uz = u[p]
        z = grid.gz[p].x
        phi = chi(z)[None, :]
        dphi = chi.d(z)[None, :]
        c1 = phi * hx[:, None]
        c3 = dphi * hv[:, None]
        out.append((c1 * grid.dz(ux, p) + c3 * grid.dz(uz, p)) / (1.0 + c3))
    return tuple(out)


def curvature_defect(hf):
    """G_kappa(h) = div(grad h / sqrt(1 + |grad h|^2)) - Delta h at the unknowns of a HeightField.

    On the interval the chain-rule form h'' (W^{-3} - 1) is used, which is
    exact for polynomial h of degree <= N.  On the disk the divergence form
    div(grad h (1/W - 1)) with 1/W - 1 = -|v|^2 / (W (1 + W)) is used.
    """
    disc = hf.disc
    v = hf.values
    if hasattr(disc, "grid"):
        d1 = disc.grid.D @ v
        d2 = disc.grid.D2 @ v
        sq = d1 * d1
        W = np.sqrt(1.0 + sq)
        # W^{-3} - 1 = -(W^3 - 1) / W^3,  W^3 - 1 = sq (W^2 + W + 1) / (W + 1)
        return -d2 * sq * (W * W + W + 1.0) / ((W + 1.0) * W**3)
    grads = [G @ v for G in disc.G]
    sq = sum(g * g for g in grads)
    W = np.sqrt(1.0 + sq)
    factor = -sq / (W * (1.0 + W))
    return sum(D @ (g * factor) for D, g in zip(disc.Div, grads))


def wall_stress_defect(grid, u, h, chi, mu=(1.0, 1.0)):
    """Tangential part of mu (M_0 grad u + grad u^T M_0^T) nu on the lateral walls.

    At x = -R (nu = -e_1) and x = R (nu = e_1) this is

        mu P [chi d_nu h d_3 u + c d_3 (u . nu)] / (1 + h chi'),  P = I - nu nu^T,

    returned per phase as an array of shape (2, nz + 1, 2): wall, z node, component.
    """
    check_admissible(chi, h)
    hv, hx = _height_on_grid(grid, h)
    out = []
    for p in (0, 1):
        ux, uz = u[p]
        z = grid.gz[p].x
        phi = chi(z)
        dphi = chi.d(z)
        dux = grid.dz(ux, p)
        duz = grid.dz(uz, p)
        res = np.zeros((2, len(z), 2))
        for w, (node, nsign) in enumerate(((0, -1.0), (-1, 1.0))):
            dnu_h = nsign * hx[node]
            c = np.stack([phi * hx[node], dphi * hv[node]], axis=-1)
            d3u = np.stack([dux[node], duz[node]], axis=-1)
            d3u_nu = nsign * dux[node]
            vec = phi[:, None] * dnu_h * d3u + c * d3u_nu[:, None]
            vec /= (1.0 + dphi * hv[node])[:, None]
            vec[:, 0] = 0.0  # P removes the e_1 component
            res[w] = mu[p] * vec
        out.append(res)
    return tuple(out)


# --- self-test battery -----------------------------------------------------

@dataclass
class SelfTestResult:
    name: str
    value: float
    tol: float
    passed: bool


def _slope(eps, vals):
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


def selftest(R=1.0, H1=-1.0, H2=1.0, delta=0.4, n=24):
    """Vanishing, identity and smallness checks of all kernels on a sample configuration."""
    from .capillary import IntervalDisc

    chi = ChiProfile(delta, H1, H2)
    grid = LayerGrid(R, H1, H2, n, n)
    k = math.pi / (2 * R)
    amp = 0.2 / chi.dphi_sup
    h = SurfaceHeight(
        lambda x: amp * np.cos(k * (x[..., 0] + R)),
        lambda x: (-amp * k * np.sin(k * (x[..., 0] + R)))[..., None],
        amp,
    )
    zero_h = SurfaceHeight.zero()
    # velocity: u_x = sin(k(x+R)) f'(z), u_z = -k cos(k(x+R)) f(z) has u.nu = 0 at x = +-R
    def vel(x, z):
        f = z * (z - H1) * (z - H2)
        fp = 3 * z * z - 2 * (H1 + H2) * z + H1 * H2
        return np.sin(k * (x + R)) * fp, -k * np.cos(k * (x + R)) * f

    u = tuple(vel(*grid.mesh(p)) for p in (0, 1))
    u0 = tuple((np.zeros_like(a), np.zeros_like(b)) for a, b in u)
    results = []

    def add(name, value, tol, cmp="le"):
        ok = value <= tol if cmp == "le" else value >= tol
        results.append(SelfTestResult(name, float(value), float(tol), bool(ok)))

    def sup(fields):
        return max(float(np.max(np.abs(f))) for f in fields)

    pts = np.array([[0.3, 0.05], [-0.7, -0.15], [0.9, 0.25], [0.1, 0.5]])
    add("hanzawa_h0_identity", float(np.max(np.abs(hanzawa_map(chi, zero_h, pts) - pts))), 0.0)
    far = np.array([[0.2, delta], [0.4, -1.5 * delta]])
    add("hanzawa_outside_support", float(np.max(np.abs(hanzawa_map(chi, h, far) - far))), 0.0)
    add("m0_h0_zero", float(np.max(np.abs(m0_matrix(chi, zero_h, pts)))), 0.0)
    T = theta_prime_T(chi, h, pts)
    M = m0_matrix(chi, h, pts)
    eye = np.eye(2)
    add("m0_inverse_identity", float(np.max(np.abs((eye - M) @ (eye + T) - eye))), 1e-14)
    direct = T @ np.linalg.inv(eye + T)
    add("m0_dense_oracle", float(np.max(np.abs(M - direct))), 1e-13)
    add("divergence_h0", sup(divergence_defect(grid, u, zero_h, chi)), 0.0)
    add("divergence_u0", sup(divergence_defect(grid, u0, h, chi)), 0.0)
    add("wall_u0", sup(wall_stress_defect(grid, u0, h, chi)), 0.0)
    add("wall_compliant", sup(wall_stress_defect(grid, u, h, chi)), 1e-12)
    disc = IntervalDisc(R, 16)
    add("curvature_h0", float(np.max(np.abs(curvature_defect(disc.zero())))), 0.0)
    add("curvature_affine", float(np.max(np.abs(curvature_defect(disc.from_function(lambda x: 0.3 * x + 0.1))))), 1e-12)
    x = disc.x
    exact = (1 + x * x) ** -1.5 - 1
    add("curvature_parabola", float(np.max(np.abs(curvature_defect(disc.from_function(lambda x: 0.5 * x * x)) - exact))), 1e-12)
    y = hanzawa_map(chi, h, pts)
    add("roundtrip", float(np.max(np.abs(hanzawa_inverse(chi, h, y) - pts))), 1e-10)
    eps = 0.5 ** np.arange(1, 6)
    m0 = []
    gk = []
    for e in eps:
        he = SurfaceHeight(lambda x, e=e: e * h.value(x), lambda x, e=e: e * h.grad(x), e * h.sup)
        m0.append(float(np.max(np.abs(m0_matrix(chi, he, pts)))))
        gk.append(float(np.max(np.abs(curvature_defect(disc.field(e * disc.u1))))))
    add("m0_slope_low", _slope(eps, m0), 0.95, "ge")
    add("m0_slope_high", -_slope(eps, m0), -1.05, "ge")
    add("curvature_slope", _slope(eps, gk), 2.7, "ge")
    unit = 1.0 / (2.0 * chi.dphi_sup)
    for name, s in (("guard_below", unit * (1 - 1e-12)), ("guard_at", unit)):
        hs = SurfaceHeight(lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros(x.shape), s)
        try:
            check_admissible(chi, hs)
            accepted = 1.0
        except AdmissibilityError:
            accepted = 0.0
        want = 1.0 if name == "guard_below" else 0.0
        add(name, abs(accepted - want), 0.0)
    return results
