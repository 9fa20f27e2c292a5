"""Tests for closed-form Stokes/connection matrices and the caterpillar product."""

import cmath
import math

import numpy as np
import pytest

from isomono.cmatrix import ArgCplx, expm
from isomono.drivers import random_boundary_value, rational_fixture_matrix
from isomono.errors import ConditionViolated, OnAntiStokes, QSelectionAmbiguous
from isomono.monodromy import (
    CaterpillarAngles,
    caterpillar_nu,
    component_of,
    connection_Ek,
    diag_via_minors,
    lu_split,
    md_cat,
    order_from_J,
    q_even,
    q_odd,
    relation_suite,
    stokes_Ek,
    stokes_entries,
)
from isomono.operators import UPoint, delta_k, u_from_z, ZPoint

RNG = np.random.default_rng(606)


def draw_nonres(n, scale=0.3, rng=RNG):
    """Random matrix whose leading blocks are safely non-resonant."""
    while True:
        a = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        ok = True
        for k in range(2, n + 1):
            lam = np.linalg.eigvals(a[:k, :k])
            gaps = [lam[i] - lam[j] for i in range(k) for j in range(k) if i != j]
            if not all(abs(g - round(g.real)) > 0.12 and abs(g) > 0.1 for g in gaps):
                ok = False
        if ok:
            return a


class TestWindows:
    def test_q_values(self):
        assert q_even(-math.pi / 2) == 0
        assert q_odd(-math.pi / 2) == -1
        assert q_even(math.pi / 2) == 0
        assert q_odd(math.pi / 2) == 1
        assert q_even(2 * math.pi + 0.3) == 2
        assert q_odd(2 * math.pi + 0.3) == 3

    def test_boundary_raises(self):
        with pytest.raises(QSelectionAmbiguous):
            q_even(math.pi)
        with pytest.raises(QSelectionAmbiguous):
            q_odd(0.0)


class TestStokesEk:
    def test_zero_coupling_gives_identity(self):
        a = draw_nonres(3)
        a = a.copy()
        a[:2, 2] = 0.0
        a[2, :2] = 0.0
        pair = stokes_Ek(3, a, -math.pi / 2)
        assert np.allclose(pair.s_plus, np.eye(3), atol=1e-12)
        assert np.allclose(pair.s_minus, np.eye(3), atol=1e-12)

    def test_rational_fixture_identity(self):
        phi0 = rational_fixture_matrix(3)
        for k in (2, 3):
            pair = stokes_Ek(k, phi0, -math.pi / 2)
            assert np.allclose(pair.s_plus, np.eye(3), atol=1e-12)
            assert np.allclose(pair.s_minus, np.eye(3), atol=1e-12)
        # with delta Phi0 = 0 the LU identity collapses the monodromy factor
        pair = stokes_Ek(3, phi0, -math.pi / 2)
        nu = np.linalg.inv(pair.s_minus) @ expm(2j * math.pi * pair.formal_diag) @ pair.s_plus
        assert np.allclose(nu, np.eye(3), atol=1e-12)

    def test_triangularity_and_unit_diagonal(self):
        a = draw_nonres(3)
        for d in (-math.pi / 2, 0.4, 2.8):
            pair = stokes_Ek(3, a, d)
            for s in (pair.s_plus, pair.s_minus):
                assert np.allclose(np.diag(s), 1.0)
            # exactly one of the pair carries the column, the other the row
            col_in_plus = np.linalg.norm(pair.s_plus[:2, 2]) > 0 and np.linalg.norm(
                pair.s_plus[2, :2]
            ) == 0
            col_in_minus = np.linalg.norm(pair.s_minus[:2, 2]) > 0 and np.linalg.norm(
                pair.s_minus[2, :2]
            ) == 0
            assert col_in_plus != col_in_minus

    def test_anti_stokes_rejected(self):
        with pytest.raises(OnAntiStokes):
            stokes_Ek(2, draw_nonres(2), math.pi)

    def test_against_oracle_n2(self):
        from isomono.oracle import connection_numeric

        a = draw_nonres(2)
        d = -math.pi / 2
        pair = stokes_Ek(2, a, d)
        u = np.array([0.0, 1.0])
        c0 = connection_numeric(u, a, d).c
        cp = connection_numeric(u, a, d + math.pi).c
        cm = connection_numeric(u, a, d - math.pi).c
        assert np.linalg.norm(pair.s_plus - cp @ np.linalg.inv(c0)) < 1e-6
        assert np.linalg.norm(pair.s_minus - cm @ np.linalg.inv(c0)) < 1e-6


class TestConnectionEk:
    def test_diagonal_is_identity(self):
        a = np.diag([0.21 - 0.3j, -0.17 + 0.4j, 0.05]).astype(complex)
        for k in (1, 2, 3):
            c, cinv = connection_Ek(k, a, -math.pi / 2)
            assert np.allclose(c, np.eye(3), atol=1e-12)
            assert np.allclose(cinv, np.eye(3), atol=1e-12)

    def test_inverse_consistency(self):
        a = draw_nonres(3)
        c, cinv = connection_Ek(3, a, -math.pi / 2)
        assert np.linalg.norm(c @ cinv - np.eye(3)) < 1e-9

    def test_lu_identity(self):
        # the two routes to the monodromy factor agree entrywise
        a = draw_nonres(3)
        for d in (-math.pi / 2, 0.9):
            pair = stokes_Ek(3, a, d)
            c, cinv = connection_Ek(3, a, d)
            lhs = np.linalg.inv(pair.s_minus) @ expm(2j * math.pi * pair.formal_diag) @ pair.s_plus
            rhs = c @ expm(2j * math.pi * a) @ cinv
            assert np.linalg.norm(lhs - rhs) < 1e-10 * max(1.0, np.linalg.norm(rhs))

    def test_against_oracle_n3_k2(self):
        from isomono.oracle import connection_numeric

        a = draw_nonres(3)
        dk_a = delta_k(a, 2)
        c, _ = connection_Ek(2, a, -math.pi / 2)
        u = np.array([0.0, 1.0, 0.0])
        est = connection_numeric(np.array([0.0, 1.0]), a[:2, :2], -math.pi / 2)
        assert np.linalg.norm(c[:2, :2] - est.c) < 1e-6


class TestCaterpillar:
    def test_scalar(self):
        phi0 = np.array([[0.3 + 0.1j]])
        nu = caterpillar_nu(phi0, CaterpillarAngles.frame(1))
        assert abs(nu[0, 0] - cmath.exp(2j * math.pi * (0.3 + 0.1j))) < 1e-12

    def test_diagonal(self):
        phi0 = np.diag([0.2, -0.3 + 0.25j, 0.11]).astype(complex)
        nu = caterpillar_nu(phi0, CaterpillarAngles.frame(3))
        assert np.linalg.norm(nu - expm(2j * math.pi * phi0)) < 1e-12

    def test_det_and_eigs(self):
        rng = np.random.default_rng(13)
        phi0 = random_boundary_value(3, rng)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        assert abs(np.linalg.det(md.nu) - cmath.exp(2j * math.pi * np.trace(phi0))) < 1e-9
        assert md.check() < 1e-8

    def test_angle_covariance_two_pi(self):
        # scaling u_3 by e^{2 pi i} inside the product equals the caterpillar
        # data of the gauge-twisted boundary value with the angle shifted
        rng = np.random.default_rng(14)
        phi0 = random_boundary_value(3, rng)
        d = -math.pi / 2
        c1, _ = connection_Ek(1, phi0, d)
        c2, _ = connection_Ek(2, phi0, d)
        c3s, _ = connection_Ek(3, phi0, d + 2 * math.pi)
        scale = expm(2j * math.pi * delta_k(phi0, 2))  # e^{2 pi i delta_u} for u = E_3
        prod = c1 @ c2 @ scale @ c3s
        lhs = prod @ expm(2j * math.pi * phi0) @ np.linalg.inv(prod)
        w = expm(2j * math.pi * delta_k(phi0, 2))
        phi_tw = w @ phi0 @ np.linalg.inv(w)
        rhs = caterpillar_nu(phi_tw, CaterpillarAngles(d, (0.0, 0.0, 2 * math.pi)))
        assert np.linalg.norm(lhs - rhs) < 1e-9 * max(1.0, np.linalg.norm(rhs))

    def test_matches_oracle(self):
        from isomono.drivers import caterpillar_check

        rng = np.random.default_rng(777)
        out = caterpillar_check(random_boundary_value(3, rng))
        assert out["difference"] < 1e-4
        assert out["oracle_discrepancy"] < 1e-6


class TestLuSplit:
    def test_order_from_J(self):
        assert order_from_J(3, {1, 2}) == [1, 2, 3]
        assert order_from_J(3, set()) == [3, 2, 1]
        assert order_from_J(3, {1}) == [3, 1, 2]

    def test_diagonal(self):
        lam = np.diag([0.2, -0.1, 0.4]).astype(complex)
        nu = expm(2j * math.pi * lam)
        pair = lu_split(nu, lam, {1, 2})
        assert np.allclose(pair.s_plus, np.eye(3), atol=1e-12)
        assert np.allclose(pair.s_minus, np.eye(3), atol=1e-12)

    def test_rational_fixture(self):
        phi0 = rational_fixture_matrix(3)
        pair = lu_split(np.eye(3), np.zeros((3, 3)), {1, 2})
        assert np.allclose(pair.s_plus, np.eye(3))
        assert np.allclose(pair.s_minus, np.eye(3))

    def test_reassembles_in_native_component(self):
        # the caterpillar frame theta = 0, d = -pi/2 lives in J = {1, .., n-1};
        # the pivot condition pins the split there and rejects foreign labels
        from isomono.errors import SingularMinor

        rng = np.random.default_rng(15)
        phi0 = random_boundary_value(3, rng)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        pair = lu_split(md.nu, md.lam, {1, 2})
        nu_back = np.linalg.inv(pair.s_minus) @ expm(2j * math.pi * md.lam) @ pair.s_plus
        assert np.linalg.norm(nu_back - md.nu) < 1e-9 * max(1.0, np.linalg.norm(md.nu))
        with pytest.raises(SingularMinor):
            lu_split(md.nu, md.lam, set())


class TestStokesEntries:
    @staticmethod
    def _collinear_upoint(n=3, theta_v=0.3):
        zs = [ArgCplx(1.0, theta_v)] + [ArgCplx(1.0, 0.0)] * (n - 1)
        return u_from_z(ZPoint(n, tuple(zs)))

    def test_diagonal_vanishes(self):
        phi0 = np.diag([0.2, -0.3 + 0.2j, 0.15]).astype(complex)
        up = self._collinear_upoint()
        s = stokes_entries(phi0, up, -math.pi / 2 - 0.3)
        assert np.linalg.norm(s) < 1e-12

    def test_matches_lu_of_caterpillar(self):
        rng = np.random.default_rng(16)
        phi0 = random_boundary_value(3, rng)
        theta_v = 0.3
        up = self._collinear_upoint(theta_v=theta_v)
        d = -math.pi / 2 - theta_v
        s = stokes_entries(phi0, up, d)
        md = md_cat(phi0, CaterpillarAngles.from_upoint(up, d))
        pair = lu_split(md.nu, md.lam, component_of(up, d), d)
        want = pair.s_plus - pair.s_minus
        np.fill_diagonal(want, 0.0)
        assert np.linalg.norm(s - want) < 1e-8 * max(1.0, np.linalg.norm(want))

    def test_n2_reduction(self):
        # single Gamma quotient, checked against the LU of the caterpillar
        rng = np.random.default_rng(17)
        phi0 = random_boundary_value(2, rng)
        up = self._collinear_upoint(2)
        d = -math.pi / 2 - 0.3
        s = stokes_entries(phi0, up, d)
        md = md_cat(phi0, CaterpillarAngles.from_upoint(up, d))
        pair = lu_split(md.nu, md.lam, component_of(up, d), d)
        want = pair.s_plus - pair.s_minus
        np.fill_diagonal(want, 0.0)
        assert np.linalg.norm(s - want) < 1e-9

    def test_interior_point_rejected(self):
        phi0 = np.diag([0.1, 0.2, 0.3]).astype(complex)
        u = np.array([0.1 + 0j, 1.0 + 2j, 0.5 + 1j])  # middle rotated-Im
        up = UPoint(3, u, np.array([cmath.phase(u[0]), cmath.phase(u[1] - u[0]),
                                    cmath.phase(u[2] - u[1])]))
        with pytest.raises(ConditionViolated):
            stokes_entries(phi0, up, 0.0)


class TestDiagViaMinors:
    def test_k1_trivial(self):
        a = draw_nonres(3)
        p, pinv, alpha, beta = diag_via_minors(a, 1, [2.0])
        assert np.allclose(p @ pinv, np.eye(1), atol=1e-12)

    def test_diagonalizes(self):
        a = draw_nonres(3)
        ds = [1.0, 2.0, 0.5]
        p, pinv, alpha, beta = diag_via_minors(a, 3, ds)
        assert np.linalg.norm(p @ pinv - np.eye(3)) < 1e-9
        conj = pinv @ a @ p
        off = conj - np.diag(np.diag(conj))
        assert np.linalg.norm(off) < 1e-9

    def test_alpha_beta_match_conjugation(self):
        a = draw_nonres(4)
        k = 2
        p, pinv, alpha, beta = diag_via_minors(a, k, [1.0, 1.0])
        big_p = np.eye(4, dtype=complex)
        big_p[:k, :k] = p
        big_pinv = np.eye(4, dtype=complex)
        big_pinv[:k, :k] = pinv
        conj = big_pinv @ a @ big_p
        assert np.linalg.norm(conj[:k, k:] - alpha) < 1e-10
        assert np.linalg.norm(conj[k:, :k] - beta) < 1e-10


class TestRelationSuite:
    def test_diagonal_input(self):
        a = np.diag([0.2, -0.1 + 0.3j, 0.4]).astype(complex)
        out = relation_suite(a)
        assert max(out.values()) < 1e-10

    def test_rational_fixture(self):
        out = relation_suite(rational_fixture_matrix(3))
        assert max(out.values()) < 1e-8

    def test_random(self):
        a = draw_nonres(3, scale=0.25)
        out = relation_suite(a)
        assert max(out.values()) < 1e-8, out


class TestTwoPathsN2:
    def test_lu_of_caterpillar_equals_one_step_stokes(self):
        # for n = 2 the caterpillar product has a single nontrivial factor,
        # so its LU split must reproduce the one-step Stokes pair entrywise
        rng = np.random.default_rng(19)
        phi0 = random_boundary_value(2, rng)
        d = -math.pi / 2
        md = md_cat(phi0, CaterpillarAngles.frame(2))
        pair_lu = lu_split(md.nu, md.lam, {1}, d)
        pair_direct = stokes_Ek(2, phi0, d)
        assert np.linalg.norm(pair_lu.s_plus - pair_direct.s_plus) < 1e-8
        assert np.linalg.norm(pair_lu.s_minus - pair_direct.s_minus) < 1e-8
