import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtcyl import CrossSection, DomainError
from rtcyl.capillary import (
    DiskDisc,
    HeightField,
    IntervalDisc,
    Reflection,
    Rotation,
    StabilityTag,
    alpha2_oracle,
    branch_trace,
    branch_zero_mode_check,
    capillary_jacobian_apply,
    capillary_residual,
    kernel_mode,
    ls_diagnostics,
    newton_solve,
    symmetry_check,
    tag_stability,
)
from rtcyl.geometry import bessel_j_array, bessel_jprime_zero
from rtcyl.transform import ChiProfile

IV = CrossSection.interval(1.0)
DK = CrossSection.disk(1.0)


@pytest.fixture(scope="module")
def idisc():
    return IntervalDisc(1.0, 32)


@pytest.fixture(scope="module")
def ddisc():
    return DiskDisc(1.0, M=8)


@pytest.fixture(scope="module")
def ibranch(idisc):
    return branch_trace(IV, 1, 40, 0.01, disc=idisc, s_max=0.2)


@pytest.fixture(scope="module")
def ibranch_minus(idisc):
    return branch_trace(IV, -1, 40, 0.01, disc=idisc, s_max=0.2)


@pytest.fixture(scope="module")
def dbranch(ddisc):
    return branch_trace(DK, 1, 8, 0.02, disc=ddisc)


def disk_mode(disc, m, k, kind="c"):
    j = bessel_jprime_zero(m, k)
    trig = np.cos if kind == "c" else np.sin
    return disc.from_function(lambda r, p: bessel_j_array(m, j * r) * trig(m * p)).values


class TestResidual:
    def test_zero_field(self, idisc, ddisc):
        for disc in (idisc, ddisc):
            for alpha in (0.0, 1.5, 40.0):
                F, (bc, mean) = capillary_residual(alpha, disc.zero())
                assert np.all(F == 0) and np.all(bc == 0) and mean == 0

    def test_affine_interval(self, idisc):
        for alpha in (0.0, 3.0):
            F, _ = capillary_residual(alpha, idisc.from_function(lambda x: x))
            assert np.max(np.abs(F - alpha * idisc.x)) <= 1e-10 * (1 + alpha)

    @pytest.mark.parametrize("which", ["interval", "disk"])
    def test_cubic_slope(self, which, idisc, ddisc):
        disc = idisc if which == "interval" else ddisc
        eps = 0.1 * 0.5 ** np.arange(5)
        mask = np.isin(np.arange(disc.n), disc.field_rows)
        vals = [disc.norm(capillary_residual(disc.lambda1, disc.field(e * disc.u1))[0] * mask) for e in eps]
        slopes = np.diff(np.log(vals)) / np.diff(np.log(eps))
        assert np.all(np.abs(slopes - 3) <= 0.2)

    def test_overflow_rejected(self, idisc):
        with pytest.raises(DomainError):
            capillary_residual(1.0, idisc.field(1e200 * idisc.x))

    def test_odd_in_h(self, idisc):
        h = idisc.field(0.2 * idisc.u1 + 0.05 * idisc.x**3)
        F1, _ = capillary_residual(1.3, h)
        F2, _ = capillary_residual(1.3, idisc.field(-h.values))
        assert np.array_equal(F1, -F2)


class TestJacobian:
    def test_linear_at_zero(self, idisc, ddisc):
        rng = np.random.default_rng(3)
        for disc in (idisc, ddisc):
            dh = rng.standard_normal(disc.n)
            lhs = capillary_jacobian_apply(2.0, disc.zero(), dh)
            rhs = disc.linear_apply(2.0, dh)
            assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(rhs)))

    def test_direct_laplacian_interval(self, idisc):
        dh = np.cos(2 * math.pi * (idisc.x + 1) / 2) + 0.3 * idisc.x**2
        lhs = capillary_jacobian_apply(1.0, idisc.zero(), dh)
        rhs = idisc.grid.D2 @ dh + dh
        # D2 and D @ D round differently; the gap is bounded by eps N^4
        assert np.max(np.abs(lhs - rhs)) <= 1e-16 * idisc.N**4 * np.max(np.abs(dh)) * 10

    @pytest.mark.parametrize("which", ["interval", "disk"])
    def test_kernel(self, which, idisc, ddisc):
        disc = idisc if which == "interval" else ddisc
        for u in (disc.u1, disc.u2):
            if u is None:
                continue
            r = capillary_jacobian_apply(disc.lambda1, disc.zero(), u)
            assert np.max(np.abs(r[disc.field_rows])) <= 1e-10

    @pytest.mark.parametrize("which", ["interval", "disk"])
    def test_central_difference(self, which, idisc, ddisc):
        disc = idisc if which == "interval" else ddisc
        rng = np.random.default_rng(5)
        h = 0.15 * disc.u1 + 0.02 * (disc.u2 if disc.u2 is not None else disc.u1**2)
        dh = disc.u1 + 0.3 * rng.standard_normal(disc.n) * 0.01
        J = disc.jacobian(1.7, h) @ dh
        eps = 1e-2 * 0.5 ** np.arange(4)
        errs = []
        for e in eps:
            fd = (disc.residual(1.7, h + e * dh) - disc.residual(1.7, h - e * dh)) / (2 * e)
            errs.append(np.max(np.abs(fd - J)))
        slopes = np.diff(np.log(errs)) / np.diff(np.log(eps))
        assert np.all(np.abs(slopes - 2) <= 0.2)

    def test_symmetry_interval(self, idisc, ibranch):
        x = idisc.x
        dirs = [np.cos(q * math.pi * (x + 1) / 2) for q in range(1, 6)]
        for alpha, h in [(2.0, np.zeros(idisc.n)), (5.0, np.zeros(idisc.n))] + [(bp.alpha, bp.h.values) for bp in ibranch[::6]]:
            J = idisc.jacobian(alpha, h)
            for a in dirs:
                for b in dirs:
                    d = abs(idisc.inner(a, J @ b) - idisc.inner(J @ a, b))
                    scale = idisc.norm(a) * idisc.norm(J @ b) + idisc.norm(J @ a) * idisc.norm(b)
                    assert d <= 1e-10 * scale

    def test_symmetry_disk(self, ddisc, dbranch):
        dirs = [disk_mode(ddisc, 1, 1), disk_mode(ddisc, 2, 1, "s"), disk_mode(ddisc, 0, 1), disk_mode(ddisc, 3, 1), disk_mode(ddisc, 1, 2, "s")]
        for alpha, h in [(2.0, np.zeros(ddisc.n))] + [(bp.alpha, bp.h.values) for bp in dbranch[1::3]]:
            J = ddisc.jacobian(alpha, h)
            for a in dirs:
                for b in dirs:
                    d = abs(ddisc.inner(a, J @ b) - ddisc.inner(J @ a, b))
                    scale = ddisc.norm(a) * ddisc.norm(J @ b) + ddisc.norm(J @ a) * ddisc.norm(b)
                    assert d <= 1e-10 * scale


class TestKernelMode:
    def test_interval(self, idisc):
        u1, u2 = kernel_mode(IV, disc=idisc)
        assert u2 is None
        assert abs(u1.norm() - 1.0) <= 1e-12
        assert np.allclose(u1.values, np.cos(math.pi * (idisc.x + 1) / 2), atol=1e-15)

    def test_disk(self, ddisc):
        u1, u2 = kernel_mode(DK, disc=ddisc)
        assert abs(ddisc.inner(u1.values, u2.values)) <= 1e-12
        assert abs(u1.norm() - 1.0) <= 1e-12 and abs(u2.norm() - 1.0) <= 1e-12
        assert np.max(np.abs(ddisc.bc @ u1.values)) <= 1e-10
        assert np.max(np.abs(ddisc.bc @ u2.values)) <= 1e-10

    def test_kernel_dimension(self, idisc, ddisc):
        for disc, dim in ((idisc, 1), (ddisc, 2)):
            eigs = np.abs(disc.constrained_eigs(disc.lambda1, np.zeros(disc.n)))
            assert np.count_nonzero(eigs <= 1e-8 * eigs[dim]) == dim


class TestNewton:
    def test_trivial_solution(self, idisc, ddisc):
        for disc in (idisc, ddisc):
            h = newton_solve(0.5 * disc.lambda1, disc.field(0.05 * disc.u1))
            assert h.norm() <= 1e-11

    def test_mean_projection(self, idisc):
        h0 = idisc.field(0.01 * idisc.u1 + 1.0)
        h = newton_solve(1.0, h0)
        assert abs(h.mean) <= 1e-12
        assert abs(h.mean) <= 1e-12 * max(h.norm(), 1.0)

    def test_reconverges_to_branch(self, idisc, ibranch):
        bp = ibranch[10]
        pred = idisc.field(bp.h.values * 1.02)
        F, _ = capillary_residual(bp.alpha, pred)
        h = newton_solve(bp.alpha, pred)
        assert idisc.norm(h.values - bp.h.values) <= 1e-8


class TestBranchInterval:
    def test_residuals_and_start(self, ibranch, idisc):
        assert ibranch.stop_reason == "s_max"
        assert abs(ibranch[0].alpha - idisc.lambda1) <= 1e-10
        assert ibranch[0].s == 0.0
        assert abs(ibranch[-1].s) >= 0.2
        for bp in ibranch:
            assert bp.residual <= 1e-10 * (1 + bp.h.norm())
            assert abs(bp.h.mean) <= 1e-12 * max(bp.h.norm(), 1e-300) or bp.h.norm() == 0

    def test_subcritical(self, ibranch, ibranch_minus, idisc):
        for br in (ibranch, ibranch_minus):
            for bp in br[1:]:
                assert bp.alpha < idisc.lambda1

    def test_pitchfork(self, ibranch, ibranch_minus, idisc):
        for p, q in zip(ibranch, ibranch_minus):
            assert abs(p.s + q.s) <= 1e-8
            assert abs(p.alpha - q.alpha) <= 1e-8
            assert idisc.norm(q.h.values - idisc.reflect(p.h.values)) <= 1e-8

    def test_tags(self, ibranch):
        assert ibranch[0].stability_tag is StabilityTag.INDETERMINATE
        for bp in ibranch:
            if 0.02 <= abs(bp.s) <= 0.2:
                assert bp.stability_tag is StabilityTag.UNSTABLE_EQUILIBRIUM
                assert tag_stability(bp) is StabilityTag.UNSTABLE_EQUILIBRIUM

    def test_ls_diagnostics(self, ibranch, idisc):
        diag = ls_diagnostics(ibranch)
        assert abs(diag.alpha1_fit) <= 1e-6
        assert diag.alpha2_fit < 0
        assert abs(diag.alpha2_fit - diag.alpha2_oracle) <= 0.02 * abs(diag.alpha2_oracle)
        assert diag.candidate_grad == pytest.approx(-3 * math.pi**4 / 64, rel=1e-10)
        assert diag.candidate_value == pytest.approx(-0.75, rel=1e-10)
        assert abs(diag.alpha0_fit - idisc.lambda1) <= 1e-6

    def test_oracle_agrees_with_gradient_candidate(self, idisc):
        value, ratio = alpha2_oracle(idisc)
        assert value == pytest.approx(-3 * math.pi**4 / 64, rel=1e-3)
        assert ratio <= 1e-8

    def test_ls_needs_points(self, ibranch):
        with pytest.raises(DomainError):
            ls_diagnostics(ibranch[:3])

    def test_argument_checks(self):
        for kw in (dict(ds=0.0), dict(ds=0.2), dict(steps=0), dict(steps=201), dict(direction=0)):
            with pytest.raises(DomainError):
                branch_trace(IV, **{"direction": 1, "steps": 5, "ds": 0.01, **kw})

    def test_admissibility_guard_stops(self, idisc):
        chi = ChiProfile(0.1, -1.0, 1.0)
        br = branch_trace(IV, 1, 40, 0.01, disc=idisc, chi=chi, diagnostics=False)
        assert br.stop_reason == "admissibility"
        for bp in br:
            assert 1 - 2 * bp.h.sup_norm() * chi.dphi_sup > 0


class TestBranchDisk:
    def test_branch(self, dbranch, ddisc):
        assert dbranch.stop_reason == "steps"
        for bp in dbranch:
            assert bp.residual <= 1e-10 * (1 + bp.h.norm())
        for bp in dbranch[1:]:
            assert bp.alpha < ddisc.lambda1
        diag = ls_diagnostics(dbranch, s_window=0.2)
        assert diag.alpha2_fit < 0
        assert abs(diag.alpha2_fit - diag.alpha2_oracle) <= 0.02 * abs(diag.alpha2_oracle)

    def test_zero_mode(self, dbranch):
        for bp in dbranch[1:]:
            lo, nxt, angle = branch_zero_mode_check(bp)
            assert lo <= 1e-6 * nxt
            assert angle <= 1e-4

    def test_zero_mode_needs_disk(self, ibranch):
        with pytest.raises(DomainError):
            branch_zero_mode_check(ibranch[3])

    def test_tag_rotation_invariant(self, dbranch, ddisc):
        bp = dbranch[-1]
        rot = ddisc.field(ddisc.rotate(bp.h.values, math.pi / 7))
        from dataclasses import replace

        bp_rot = replace(bp, h=rot)
        assert tag_stability(bp_rot) is tag_stability(bp) is StabilityTag.UNSTABLE_EQUILIBRIUM
        a = np.sort(ddisc.constrained_eigs(bp.alpha, bp.h.values).real)
        b = np.sort(ddisc.constrained_eigs(bp.alpha, rot.values).real)
        assert np.allclose(a, b, atol=1e-9 * np.max(np.abs(a)))


class TestSymmetry:
    def test_reflection_exact(self, ibranch, dbranch):
        rng = np.random.default_rng(11)
        for bp in list(ibranch[::5]) + list(dbranch[::3]):
            disc = bp.h.disc
            assert symmetry_check(bp.alpha, bp.h, Reflection()) == 0.0
            h = disc.field(bp.h.values + 0.01 * rng.standard_normal(disc.n))
            assert symmetry_check(0.7, h, Reflection()) == 0.0

    def test_rotation(self, dbranch):
        for bp in dbranch[1:]:
            for alpha in (0.0, 2.0, bp.alpha + 1.0):
                assert symmetry_check(alpha, bp.h, Rotation(math.pi / 7), relative=True) <= 1e-12

    def test_zero_field(self, ddisc, idisc):
        assert symmetry_check(1.0, ddisc.zero(), Rotation(0.3)) == 0.0
        assert symmetry_check(1.0, idisc.zero(), Reflection()) == 0.0

    def test_rotation_needs_disk(self, idisc):
        with pytest.raises(DomainError):
            symmetry_check(1.0, idisc.zero(), Rotation(0.3))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 2 * math.pi), st.floats(-0.1, 0.1), st.floats(-0.05, 0.05))
    def test_rotation_group(self, phi0, a, b):
        disc = DiskDisc(1.0, M=8)
        h = a * disc.u1 + b * disc.u2
        back = disc.rotate(disc.rotate(h, phi0), -phi0)
        assert np.max(np.abs(back - h)) <= 1e-14
        g = disc.rotation_generator(h)
        assert np.allclose(g, b * disc.u1 - a * disc.u2, atol=1e-12)
