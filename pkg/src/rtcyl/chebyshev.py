"""Chebyshev-Lobatto collocation utilities: nodes, differentiation, quadrature,
barycentric interpolation."""

import numpy as np


def lobatto_nodes(n):
    """The n+1 Chebyshev-Lobatto points on [-1, 1], ascending.

    Built from a sine so that ``x[n - j] == -x[j]`` holds bit for bit.
    """
    j = np.arange(n + 1)
    return np.sin(np.pi * (2 * j - n) / (2.0 * n))


def diff_matrix(n, antisymmetrize=False):
    """First-derivative collocation matrix on :func:`lobatto_nodes`.

    With ``antisymmetrize`` the matrix is replaced by ``(D - J D J)/2``
    (``J`` the flip), making ``D[n-i, n-j] == -D[i, j]`` exact.
    """
    x = lobatto_nodes(n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    if antisymmetrize:
        D = 0.5 * (D - D[::-1, ::-1])
    return D


def cc_weights(n):
    """Clenshaw-Curtis weights for :func:`lobatto_nodes` on [-1, 1]."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    inner = slice(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(n * theta[inner]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / n
    # theta ordering is descending in x; the weights are symmetric anyway
    return w


def bary_weights(n):
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def bary_interp(nodes, values, x, weights=None):
    """Barycentric interpolation of nodal ``values`` (last axis) at points ``x``."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if weights is None:
        weights = bary_weights(len(nodes) - 1)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    kernel = weights[None, :] / diff
    out = (values @ kernel.T) / kernel.sum(axis=1)
    rows, cols = np.nonzero(exact)
    if rows.size:
        out[..., rows] = values[..., cols]
    return out


class ChebGrid:
    """Lobatto grid mapped affinely to [a, b] with derivative matrices."""

    def __init__(self, a, b, n, antisymmetrize=False):
        self.a, self.b, self.n = float(a), float(b), int(n)
        scale = 2.0 / (self.b - self.a)
        x = lobatto_nodes(n)
        if self.a == -self.b:
            self.x = x * self.b  # keeps the grid exactly symmetric
        else:
            self.x = self.a + (x + 1.0) / scale
        self.D = diff_matrix(n, antisymmetrize) * scale
        self.D2 = self.D @ self.D
        self.w = cc_weights(n) / scale

    def interp(self, values, z):
        t = (np.asarray(z, dtype=float) - self.a) * (2.0 / (self.b - self.a)) - 1.0
        return bary_interp(lobatto_nodes(self.n), values, t)
