"""Tests for the structural operators and the u <-> z coordinate change."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isomono.cmatrix import ArgCplx
from isomono.errors import CoincidentU
from isomono.operators import (
    U_k,
    U_k_from_u,
    ZPoint,
    ad,
    ad_u_inv,
    da,
    delta_k,
    du_dz,
    rhs_T,
    rhs_u,
    u_from_z,
    z_from_u,
)

RNG = np.random.default_rng(5150)


def rand_matrix(n, scale=1.0, rng=RNG):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


class TestDelta:
    def test_zero_is_diag(self):
        a = rand_matrix(3)
        assert np.allclose(delta_k(a, 0), np.diag(np.diag(a)))

    def test_full_is_identity_op(self):
        a = rand_matrix(3)
        assert np.allclose(delta_k(a, 3), a)

    def test_entrywise_example(self):
        a = np.arange(1, 10, dtype=float).reshape(3, 3)
        want = np.array([[1, 2, 0], [4, 5, 0], [0, 0, 9]], dtype=float)
        assert np.allclose(delta_k(a, 2), want)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 4), st.integers(0, 4), st.integers(50, 2**31 - 1))
    def test_nesting(self, k1, k2, seed):
        a = rand_matrix(4, rng=np.random.default_rng(seed))
        lhs = delta_k(delta_k(a, k2), k1)
        assert np.array_equal(lhs, delta_k(a, min(k1, k2)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 4), st.integers(50, 2**31 - 1))
    def test_leibniz_closures(self, k, seed):
        rng = np.random.default_rng(seed)
        a, b = rand_matrix(4, rng=rng), rand_matrix(4, rng=rng)
        lhs1 = delta_k(delta_k(a, k) @ b, k)
        lhs2 = delta_k(a @ delta_k(b, k), k)
        want = delta_k(a, k) @ delta_k(b, k)
        assert np.allclose(lhs1, want, atol=1e-12 * np.linalg.norm(want) + 1e-13)
        assert np.allclose(lhs2, want, atol=1e-12 * np.linalg.norm(want) + 1e-13)


class TestAdDa:
    def test_self_commutator(self):
        a = rand_matrix(3)
        assert np.allclose(ad(a, a), 0.0)

    def test_da_identity(self):
        x = rand_matrix(3)
        assert np.allclose(da(np.eye(3), x), 2 * x)

    def test_direct(self):
        a = np.diag([1.0, 2.0])
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(ad(a, x), [[0.0, -1.0], [1.0, 0.0]])


class TestAdUInv:
    def test_diagonal_maps_to_zero(self):
        out = ad_u_inv([0.0, 1.0], np.diag([3.0, 4.0]))
        assert np.allclose(out, 0.0)

    def test_entrywise(self):
        out = ad_u_inv([0.0, 1.0], np.array([[0.0, 2.0], [3.0, 0.0]]))
        assert np.allclose(out, [[0.0, -2.0], [3.0, 0.0]])

    def test_inverse_of_ad_u(self):
        u = np.array([0.3 + 0.1j, 1.2 - 0.4j, -0.7 + 0.9j])
        a = rand_matrix(3)
        w = ad_u_inv(u, a)
        back = np.diag(u) @ w - w @ np.diag(u)
        assert np.allclose(back, a - np.diag(np.diag(a)), atol=1e-12)

    def test_coincident_raises(self):
        with pytest.raises(CoincidentU):
            ad_u_inv([1.0, 1.0 + 1e-15], rand_matrix(2))


class TestCoordinates:
    def test_unit_z_telescopes(self):
        zp = ZPoint.from_values([1.0, 1.0, 1.0])
        up = u_from_z(zp)
        assert np.allclose(up.u, [1.0, 2.0, 3.0])

    def test_pvi_chart(self):
        # u = (1, 2, 1 + 1/x)  <->  z = (1, 1, 1/x - 1)
        x = 0.22
        zp = ZPoint.from_values([1.0, 1.0, 1.0 / x - 1.0])
        up = u_from_z(zp)
        assert np.allclose(up.u, [1.0, 2.0, 1.0 + 1.0 / x])

    def test_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            vals = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            vals = np.where(np.abs(vals) < 0.1, vals + 0.5, vals)
            zp = ZPoint.from_values(list(vals))
            back = z_from_u(u_from_z(zp))
            for zin, zout in zip(zp.z, back.z):
                assert abs(zin.value - zout.value) < 1e-12 * max(1.0, abs(zin.value))
                assert abs(zin.arg - zout.arg) < 1e-9

    def test_cover_args_accumulate(self):
        # winding data survives the round trip even past 2 pi
        zp = ZPoint(3, (ArgCplx(2.0, 0.3), ArgCplx(1.5, 5.9), ArgCplx(3.0, -7.2)))
        up = u_from_z(zp)
        assert np.allclose(up.diffargs, [0.3, 6.2, -1.0])
        back = z_from_u(up)
        assert np.allclose([z.arg for z in back.z], [0.3, 5.9, -7.2])


class TestUk:
    def test_k2_is_zero(self):
        zp = ZPoint.from_values([2.0, 3.0, 4.0])
        assert np.allclose(U_k(zp, 2), 0.0)

    def test_k3_single_term(self):
        zp = ZPoint.from_values([2.0, 3.0, 4.0])
        assert np.allclose(U_k(zp, 3), np.diag([1.0, 0.0, 0.0]))

    def test_both_lines_agree(self):
        # the quotient form from u equals the truncated-identity sum in z
        rng = np.random.default_rng(3)
        for n, k in [(4, 4), (5, 4), (5, 5), (6, 5)]:
            vals = rng.standard_normal(n) + 1j * rng.standard_normal(n) + 2.0
            zp = ZPoint.from_values(list(vals))
            up = u_from_z(zp)
            assert np.allclose(U_k(zp, k), U_k_from_u(up, k), atol=1e-12)

    def test_n4_k4_value(self):
        zp = ZPoint.from_values([1.0, 1.0, 2.0, 1.0])
        # I~_2 + z_3^{-1} I~_1 = diag(3/2, 1, 0, 0)
        assert np.allclose(U_k(zp, 4), np.diag([1.5, 1.0, 0.0, 0.0]))
        up = u_from_z(zp)
        assert np.allclose(U_k_from_u(up, 4), np.diag([1.5, 1.0, 0.0, 0.0]))


class TestRhs:
    def test_diagonal_phi_is_stationary(self):
        zp = ZPoint.from_values([1.1, 0.8 + 0.2j, 2.0])
        phi = np.diag([0.3, 1.0 - 0.5j, -2.0])
        for j in range(1, 4):
            assert np.allclose(rhs_T(zp, j, 3, phi), 0.0, atol=1e-13)

    def test_constant_fixture(self):
        # phi = delta_{k-1} phi makes the (k,n)-flow in z_k trivial
        rng = np.random.default_rng(8)
        phi = rand_matrix(4, rng=rng)
        k = 3
        phi_c = np.diag(np.diag(phi)).astype(complex)
        phi_c[: k - 1, : k - 1] = phi[: k - 1, : k - 1]
        zp = ZPoint.from_values([1.0, 1.3, 0.7 + 0.1j, 2.2])
        out = rhs_T(zp, k, k, phi_c)
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_chart_compatibility(self):
        # d/dz_j Phi = sum_k (du_k/dz_j) d/du_k Phi for the full equation
        rng = np.random.default_rng(21)
        zp = ZPoint.from_values([0.9 + 0.3j, 1.4, 2.0 - 0.6j])
        up = u_from_z(zp)
        phi = rand_matrix(3, rng=rng)
        for j in range(1, 4):
            lhs = rhs_T(zp, j, 3, phi)
            d = np.diag(du_dz(zp, j))
            rhs = sum(d[k - 1] * rhs_u(up.u, k, phi) for k in range(1, 4))
            assert np.linalg.norm(lhs - rhs) < 1e-10 * max(1.0, np.linalg.norm(rhs))
