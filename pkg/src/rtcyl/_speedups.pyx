# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bessel kernels; same contract as ``_pykernels``."""

from libc.math cimport fabs, sqrt, cos, sin, M_PI

cdef double SERIES_SWITCH = 6.0
cdef double ASYMPTOTIC_SWITCH = 1000.0


cdef double _jn_series(int m, double x) nogil:
    cdef double half = 0.5 * x
    cdef double term = 1.0
    cdef double total, q
    cdef int i, k
    for i in range(1, m + 1):
        term *= half / i
    total = term
    q = half * half
    for k in range(1, 300):
        term *= -q / (k * (k + m))
        total += term
        if fabs(term) < 1e-17 * fabs(total) and k > half:
            break
    return total


cdef double _jn_miller(int m, double x) nogil:
    cdef double nmax = m if m > x else x
    cdef int start = 2 * ((<int>nmax + 30 + <int>sqrt(160.0 * nmax)) // 2)
    cdef double tox = 2.0 / x
    cdef double bjp = 0.0, bj = 1.0, bjm
    cdef double norm = 0.0, result = 0.0
    cdef int j
    for j in range(start, 0, -1):
        bjm = j * tox * bj - bjp
        bjp = bj
        bj = bjm
        if fabs(bj) > 1e250:
            bj *= 1e-250
            bjp *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if (j - 1) % 2 == 0 and j - 1 > 0:
            norm += bj
        if j - 1 == m:
            result = bj
    norm = 2.0 * norm + bj
    return result / norm


cdef double _jn_hankel(int m, double x) nogil:
    cdef double mu = 4.0 * m * m
    cdef double chi = x - (0.5 * m + 0.25) * M_PI
    cdef double p = 0.0, q = 0.0, term = 1.0, prev = 1e300, mag, sign
    cdef int k
    for k in range(60):
        if k > 0:
            term *= (mu - (2 * k - 1) * (2 * k - 1)) / (k * 8.0 * x)
        mag = fabs(term)
        if mag > prev:
            break
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * term
        else:
            q += sign * term
        if mag < 1e-17:
            break
        prev = mag
    return sqrt(2.0 / (M_PI * x)) * (p * cos(chi) - q * sin(chi))


cdef double _jn(int m, double x) nogil:
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    if x < SERIES_SWITCH:
        return _jn_series(m, x)
    if x < ASYMPTOTIC_SWITCH:
        return _jn_miller(m, x)
    return _jn_hankel(m, x)


cdef double _jn_prime(int m, double x) nogil:
    if m == 0:
        return -_jn(1, x)
    return 0.5 * (_jn(m - 1, x) - _jn(m + 1, x))


def jn(int m, double x):
    """J_m(x) for integer m >= 0 and x >= 0 (unchecked)."""
    return _jn(m, x)


def jn_prime(int m, double x):
    return _jn_prime(m, x)


def jn_array(int m, double[::1] xs):
    cdef Py_ssize_t i, n = xs.shape[0]
    out = [0.0] * n
    for i in range(n):
        out[i] = _jn(m, xs[i])
    return out


def bisect_jprime(int m, double a, double b, double tol, int maxit):
    """Bisect J'_m on [a, b]; the sign change is assumed, not checked."""
    cdef double fa = _jn_prime(m, a)
    cdef double mid, fm
    cdef int it
    for it in range(maxit):
        mid = 0.5 * (a + b)
        fm = _jn_prime(m, mid)
        if fm == 0.0:
            return mid, mid
        if (fm > 0.0) == (fa > 0.0):
            a = mid
            fa = fm
        else:
            b = mid
        if b - a <= tol:
            break
    return a, b
