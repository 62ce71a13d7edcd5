"""Pure-Python Bessel kernels.

Reference implementation of the routines in ``_speedups.pyx``.  Both modules
expose the same names and must agree to rounding; the package picks one in
``rtcyl._backend``.
"""

import math

SERIES_SWITCH = 6.0
ASYMPTOTIC_SWITCH = 1000.0


def _jn_series(m, x):
    half = 0.5 * x
    term = 1.0
    for i in range(1, m + 1):
        term *= half / i
    total = term
    q = half * half
    for k in range(1, 300):
        term *= -q / (k * (k + m))
        total += term
        if abs(term) < 1e-17 * abs(total) and k > half:
            break
    return total


def _jn_miller(m, x):
    # backward recurrence normalised by J0 + 2*sum(J_2k) = 1
    nmax = max(float(m), x)
    start = 2 * ((int(nmax) + 30 + int(math.sqrt(160.0 * nmax))) // 2)
    tox = 2.0 / x
    bjp = 0.0
    bj = 1.0
    norm = 0.0
    result = 0.0
    for j in range(start, 0, -1):
        bjm = j * tox * bj - bjp
        bjp = bj
        bj = bjm
        if abs(bj) > 1e250:
            bj *= 1e-250
            bjp *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if (j - 1) % 2 == 0 and j - 1 > 0:
            norm += bj
        if j - 1 == m:
            result = bj
    # after the loop bj holds the unnormalised J0
    norm = 2.0 * norm + bj
    return result / norm


def _jn_hankel(m, x):
    mu = 4.0 * m * m
    chi = x - (0.5 * m + 0.25) * math.pi
    p = 0.0
    q = 0.0
    term = 1.0
    prev = math.inf
    for k in range(0, 60):
        if k > 0:
            term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = abs(term)
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
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def jn(m, x):
    """J_m(x) for integer m >= 0 and x >= 0 (unchecked)."""
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    if x < SERIES_SWITCH:
        return _jn_series(m, x)
    if x < ASYMPTOTIC_SWITCH:
        return _jn_miller(m, x)
    return _jn_hankel(m, x)


def jn_prime(m, x):
    if m == 0:
        return -jn(1, x)
    return 0.5 * (jn(m - 1, x) - jn(m + 1, x))


def jn_array(m, xs):
    return [jn(m, float(x)) for x in xs]


def bisect_jprime(m, a, b, tol, maxit):
    """Bisect J'_m on [a, b]; the sign change is assumed, not checked."""
    fa = jn_prime(m, a)
    for _ in range(maxit):
        mid = 0.5 * (a + b)
        fm = jn_prime(m, mid)
        if fm == 0.0:
            return mid, mid
        if (fm > 0.0) == (fa > 0.0):
            a, fa = mid, fm
        else:
            b = mid
        if b - a <= tol:
            break
    return a, b
