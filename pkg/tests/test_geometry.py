import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtcyl import (
    CrossSection,
    DomainError,
    bessel_j,
    bessel_j_prime,
    bessel_jprime_zero,
    fd_neumann_oracle,
    neumann_eigenfunction_eval,
    neumann_eigenvalues,
)
from rtcyl import _pykernels
from rtcyl._backend import BACKEND, kernels
from rtcyl.geometry import fd_disk_radial

mp.mp.dps = 40


def series_bisection_jprime_zero(m, a, b):
    """High-precision bisection on a 200-term ascending series of J'_m."""

    def jp(x):
        x = mp.mpf(x)
        total = mp.mpf(0)
        for j in range(200):
            n = 2 * j + m
            if n == 0:
                continue
            total += (-1) ** j * n * (x / 2) ** (n - 1) / (2 * mp.factorial(j) * mp.factorial(j + m))
        return total

    a, b = mp.mpf(a), mp.mpf(b)
    fa = jp(a)
    for _ in range(120):
        c = (a + b) / 2
        fc = jp(c)
        if (fc > 0) == (fa > 0):
            a, fa = c, fc
        else:
            b = c
    return float((a + b) / 2)


class TestBessel:
    def test_trivial_values(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0
        assert bessel_j_prime(1, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_first_j0_zero(self):
        assert abs(bessel_j(0, 2.404825557695773)) <= 1e-12

    def test_jprime_at_j11(self):
        assert abs(bessel_j_prime(1, 1.841183781340659)) <= 1e-12

    @pytest.mark.parametrize("x", [0.1, 1.0, 3.7, 8.2, 15.0, 40.0])
    def test_j0_prime_identity(self, x):
        assert bessel_j_prime(0, x) == -bessel_j(1, x)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 20), st.floats(0.0, 80.0))
    def test_against_mpmath(self, m, x):
        ref = float(mp.besselj(m, x))
        # relative accuracy below the turning point, envelope-relative beyond it
        scale = abs(ref) if x <= m else max(abs(ref), min(1.0, math.sqrt(2.0 / (math.pi * x))))
        assert abs(bessel_j(m, x) - ref) <= 1e-12 * scale

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 19), st.floats(0.0, 60.0))
    def test_derivative_identity(self, m, x):
        expected = -bessel_j(1, x) if m == 0 else 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))
        assert bessel_j_prime(m, x) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("args", [(0, -1.0), (21, 1.0), (0, math.inf), (0, math.nan)])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            bessel_j(*args)

    def test_large_argument_accuracy(self):
        for m in (0, 3, 20):
            for x in (12.0, 55.5, 400.0, 2500.0):
                assert bessel_j(m, x) == pytest.approx(float(mp.besselj(m, x)), abs=1e-13)


class TestBackends:
    def test_backend_selected(self):
        assert BACKEND in ("cython", "python")

    @pytest.mark.parametrize("m", [0, 1, 2, 7, 20])
    def test_backends_agree(self, m):
        xs = np.linspace(0.0, 60.0, 301)
        a = np.array([_pykernels.jn(m, x) for x in xs])
        b = np.array([kernels.jn(m, x) for x in xs])
        assert np.max(np.abs(a - b)) <= 1e-14
        c = np.asarray(kernels.jn_array(m, np.ascontiguousarray(xs)))
        assert np.max(np.abs(c - b)) == 0.0
        ap = np.array([_pykernels.jn_prime(m, x) for x in xs])
        bp = np.array([kernels.jn_prime(m, x) for x in xs])
        assert np.max(np.abs(ap - bp)) <= 1e-14

    def test_bisection_backends_agree(self):
        for m, (a, b) in ((1, (1.5, 2.2)), (0, (3.5, 4.2)), (2, (2.8, 3.3))):
            lo1, hi1 = _pykernels.bisect_jprime(m, a, b, 1e-12, 200)
            lo2, hi2 = kernels.bisect_jprime(m, a, b, 1e-12, 200)
            assert hi1 - lo1 <= 1e-12 and hi2 - lo2 <= 1e-12
            assert abs(0.5 * (lo1 + hi1) - 0.5 * (lo2 + hi2)) <= 1e-12


class TestJPrimeZeros:
    @pytest.mark.parametrize(
        "m,k,expected", [(1, 1, 1.8411837813), (2, 1, 3.0542369282), (0, 1, 3.8317059702)]
    )
    def test_reference_values(self, m, k, expected):
        assert bessel_jprime_zero(m, k) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("m,k,a,b", [(1, 1, 1.5, 2.2), (2, 1, 2.8, 3.3), (0, 1, 3.5, 4.2), (5, 2, 10.0, 10.9)])
    def test_series_oracle(self, m, k, a, b):
        assert abs(bessel_jprime_zero(m, k) - series_bisection_jprime_zero(m, a, b)) <= 1e-10

    @pytest.mark.parametrize("m", [0, 1, 4, 11, 20])
    def test_mpmath_oracle_all_k(self, m):
        for k in range(1, 21):
            ref = float(mp.besseljzero(m, k, derivative=1))
            if m == 0:
                # mpmath counts x = 0 as the first zero of J'_0
                ref = float(mp.besseljzero(m, k + 1, derivative=1))
            assert abs(bessel_jprime_zero(m, k) - ref) <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 20), st.integers(1, 20))
    def test_is_a_zero(self, m, k):
        assert abs(bessel_j_prime(m, bessel_jprime_zero(m, k))) <= 1e-10

    @pytest.mark.parametrize("args", [(-1, 1), (21, 1), (0, 0), (0, 21)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            bessel_jprime_zero(*args)


class TestNeumannEigenvalues:
    def test_interval_values(self, interval):
        ev = [md.eigenvalue for md in neumann_eigenvalues(interval, 3)]
        assert ev == pytest.approx([2.4674011003, 9.8696044011, 22.2066099025], abs=1e-9)

    def test_disk_first(self, disk):
        md = neumann_eigenvalues(disk, 1)[0]
        assert md.multiplicity == 2
        assert md.index == (1, 1)
        assert md.eigenvalue == pytest.approx(float(mp.besseljzero(1, 1, derivative=1)) ** 2, abs=1e-10)

    def test_disk_ordering(self, disk):
        modes = neumann_eigenvalues(disk, 3)
        assert [md.index for md in modes] == [(1, 1), (2, 1), (0, 1)]
        assert modes[1].eigenvalue == pytest.approx(9.3283636, abs=1e-6)
        assert modes[2].eigenvalue == pytest.approx(14.6819706, abs=1e-6)
        assert modes[2].multiplicity == 1

    @pytest.mark.parametrize("kind", ["interval", "disk"])
    def test_positive_sorted_and_scaling(self, kind):
        base = [md.eigenvalue for md in neumann_eigenvalues(CrossSection(kind, 1.0), 64)]
        assert all(v > 0 for v in base)
        assert all(a < b for a, b in zip(base, base[1:]))
        for R in (0.5, 2.0):
            scaled = [md.eigenvalue for md in neumann_eigenvalues(CrossSection(kind, R), 64)]
            assert np.allclose(np.array(scaled) * R * R, base, rtol=1e-14, atol=0)

    def test_multiplicities(self, disk):
        for md in neumann_eigenvalues(disk, 64):
            assert md.multiplicity == (1 if md.m == 0 else 2)

    def test_wavenumbers(self, interval, disk):
        for md in neumann_eigenvalues(interval, 5):
            assert md.wavenumber == pytest.approx(md.m * math.pi / 2, rel=1e-15)
            assert md.eigenvalue == pytest.approx(md.wavenumber**2, rel=1e-15)
        for md in neumann_eigenvalues(disk, 10):
            assert md.wavenumber == bessel_jprime_zero(md.m, md.k)

    @pytest.mark.parametrize("count", [0, 65])
    def test_count_bounds(self, interval, count):
        with pytest.raises(DomainError):
            neumann_eigenvalues(interval, count)

    def test_radius_must_be_positive(self):
        for R in (0.0, -1.0, math.inf):
            with pytest.raises(DomainError):
                CrossSection.interval(R)


class TestEigenfunctions:
    def test_interval(self, interval):
        md = neumann_eigenvalues(interval, 1)[0]
        assert neumann_eigenfunction_eval(md, -1.0) == 1.0
        assert abs(neumann_eigenfunction_eval(md, 0.0)) <= 1e-16

    def test_disk_origin(self, disk):
        md = neumann_eigenvalues(disk, 1)[0]
        assert neumann_eigenfunction_eval(md, (0.0, 0.0)) == 0.0

    def test_discrete_neumann_condition(self, disk, interval):
        eps = 1e-4

        def dnu(f):
            # second-order one-sided difference at the boundary
            return (3 * f(1.0) - 4 * f(1.0 - eps) + f(1.0 - 2 * eps)) / (2 * eps)

        for md in neumann_eigenvalues(disk, 6):
            for phi in (0.0, 0.4, 2.0):
                e = np.array([math.cos(phi), math.sin(phi)])
                assert abs(dnu(lambda r: neumann_eigenfunction_eval(md, r * e))) <= 1e-6
        for md in neumann_eigenvalues(interval, 6):
            assert abs(dnu(lambda x: neumann_eigenfunction_eval(md, x))) <= 1e-6

    def test_outside(self, interval, disk):
        with pytest.raises(DomainError):
            neumann_eigenfunction_eval(neumann_eigenvalues(interval, 1)[0], 1.5)
        with pytest.raises(DomainError):
            neumann_eigenfunction_eval(neumann_eigenvalues(disk, 1)[0], (1.0, 0.5))


class TestFDOracle:
    def test_interval_first(self, interval):
        v = fd_neumann_oracle(interval, 200, 1)[0]
        assert abs(v - math.pi**2 / 4) <= 10.0 / 200**2

    @pytest.mark.parametrize("n", [16, 37, 128])
    def test_raw_kernel(self, interval, n):
        assert abs(fd_neumann_oracle(interval, n, 1, raw=True)[0]) <= 1e-12

    def test_disk_m1(self):
        v = fd_disk_radial(1, 1.0, 400)[0]
        assert abs(v - 1.8411837813406593**2) <= 50.0 / 400**2

    def test_disk_oracle_merges(self, disk):
        fd = fd_neumann_oracle(disk, 400, 5)
        exact = [md.eigenvalue for md in neumann_eigenvalues(disk, 5)]
        assert np.allclose(fd, exact, rtol=1e-3)

    def test_grid_minimum(self, interval):
        with pytest.raises(DomainError):
            fd_neumann_oracle(interval, 15, 1)

    def test_convergence_order(self, interval, disk):
        exact_i = [md.eigenvalue for md in neumann_eigenvalues(interval, 5)]
        for m in range(1, 6):
            errs = [abs(fd_neumann_oracle(interval, n, 5)[m - 1] - exact_i[m - 1]) for n in (100, 200, 400)]
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(np.abs(orders - 2) <= 0.3)
        for m in range(0, 6):
            exact = bessel_jprime_zero(m, 1) ** 2
            idx = 1 if m == 0 else 0
            errs = [abs(fd_disk_radial(m, 1.0, n)[idx] - exact) for n in (100, 200, 400)]
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(np.abs(orders - 2) <= 0.3)


def test_pure_python_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    code = (
        "from rtcyl import BACKEND, bessel_jprime_zero;"
        "print(BACKEND, repr(bessel_jprime_zero(1, 1)))"
    )
    env = dict(os.environ, RTCYL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, value = out.stdout.split()
    assert name == "python"
    assert abs(float(value) - bessel_jprime_zero(1, 1)) <= 1e-12
