"""Tests for the Painleve VI bridge."""

import math

import numpy as np
import pytest

from isomono.drivers import random_boundary_value
from isomono.errors import ExcludedSigma
from isomono.pvi import (
    harnad_y,
    jimbo_J,
    jimbo_frame,
    pvi_curve,
    pvi_params,
    pvi_residual,
    pvi_rhs,
    sorted_eigs,
)
from isomono.series import check_boundary


def big_sigma_draw(rng, amp=0.08, gap=0.5, lo=0.46, hi=0.54):
    """Boundary value whose leading 2-block gap sits near one half."""
    for _ in range(500):
        a = amp * rng.standard_normal((3, 3)) + amp * 1j * rng.standard_normal((3, 3))
        a = a + np.diag([gap / 2, -gap / 2, 0.0])
        ok, _gaps = check_boundary(a, 0.15)
        lam2 = np.linalg.eigvals(a[:2, :2])
        sig = lam2[0] - lam2[1]
        if ok and lo < abs(sig.real) < hi and abs(sig.imag) < 0.05:
            return a
    raise RuntimeError("no draw")


class TestHarnadY:
    def test_direct_quotients(self):
        rng = np.random.default_rng(1)
        phi = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        lam = sorted_eigs(phi)
        x = 0.3
        y, r, v = harnad_y(phi, lam, x)
        l2, l3 = lam[1], lam[2]
        v_want = (
            phi[0, 1] * phi[1, 2] * phi[2, 0] + (l2 - phi[1, 1]) * phi[0, 2] * phi[2, 0]
        ) / ((l2 - phi[0, 0]) * (l2 - phi[1, 1]) - phi[0, 1] * phi[1, 0])
        assert abs(v - v_want) < 1e-12 * max(1.0, abs(v_want))
        r_want = (
            l3 - phi[2, 2]
            + (phi[0, 2] * phi[2, 0] - (l3 - phi[0, 0]) * (l3 - phi[2, 2])) / (l3 - phi[0, 0] + v)
        ) / v
        assert abs(r - r_want) < 1e-12 * max(1.0, abs(r_want))
        assert abs(y - x / (x + (1 - x) * r)) < 1e-14

    def test_permutation_changes_y(self):
        rng = np.random.default_rng(2)
        phi = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        lam = sorted_eigs(phi)
        y1, _, _ = harnad_y(phi, lam, 0.3)
        y2, _, _ = harnad_y(phi, lam[[1, 0, 2]], 0.3)
        assert abs(y1 - y2) > 1e-8

    def test_diagonal_conjugation_invariance(self):
        rng = np.random.default_rng(3)
        phi = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        lam = sorted_eigs(phi)
        w = np.diag([1.3 + 0.2j, 0.7, 2.0 - 1.0j])
        phi2 = w @ phi @ np.linalg.inv(w)
        y1, _, _ = harnad_y(phi, lam, 0.27)
        y2, _, _ = harnad_y(phi2, lam, 0.27)
        assert abs(y1 - y2) < 1e-11 * max(1.0, abs(y1))


class TestParams:
    def test_zero_matrix(self):
        p = pvi_params(np.zeros((3, 3)), np.zeros(3))
        assert abs(p["alpha"] - 0.5) < 1e-14
        assert abs(p["beta"]) < 1e-14
        assert abs(p["gamma"]) < 1e-14
        assert abs(p["delta"] - 0.5) < 1e-14

    def test_first_integral_along_flow(self):
        from isomono.flow import Path, integrate_iso

        rng = np.random.default_rng(4)
        phi = 0.2 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        u = np.array([1.0, 2.0, 4.0 + 0j])
        traj = integrate_iso(u, phi, Path("u", 3, 4.0 + 0j, 30.0 + 0j), 1e-11)
        p0 = pvi_params(traj.phis[0])
        p1 = pvi_params(traj.phis[-1])
        for key in ("alpha", "beta", "gamma", "delta"):
            assert abs(p0[key] - p1[key]) < 1e-8

    def test_rational_spectrum_round_numbers(self):
        from isomono.drivers import rational_fixture_matrix

        phi0 = rational_fixture_matrix(3)
        lam = sorted_eigs(phi0)
        assert np.allclose(np.sort(lam.real), [-1.0, 0.0, 1.0], atol=1e-10)
        p = pvi_params(phi0, np.array([1.0, -1.0, 0.0]))
        assert abs(p["theta_inf"] - 2.0) < 1e-10
        assert abs(p["alpha"] - 0.5) < 1e-10


class TestResidual:
    def test_shrinking_solution_satisfies_pvi(self):
        rng = np.random.default_rng(5)
        phi0 = big_sigma_draw(rng)
        xs = np.linspace(0.05, 0.5, 181)
        c = pvi_curve(phi0, xs)
        res, pts, scale = pvi_residual(c.xs, c.ys, c.params)
        assert res < 1e-6 * scale

    def test_fourth_order_convergence(self):
        rng = np.random.default_rng(5)
        phi0 = big_sigma_draw(rng)
        grids = {}
        for npts in (91, 181):
            c = pvi_curve(phi0, np.linspace(0.05, 0.5, npts))
            _res, pts, _ = pvi_residual(c.xs, c.ys, c.params)
            i = int(np.argmin(np.abs(c.xs[2:-2] - 0.3)))
            grids[npts] = pts[i]
        assert grids[91] / grids[181] > 8.0

    def test_perturbed_y_blows_residual(self):
        rng = np.random.default_rng(5)
        phi0 = big_sigma_draw(rng)
        xs = np.linspace(0.05, 0.5, 91)
        c = pvi_curve(phi0, xs)
        res, _, scale = pvi_residual(c.xs, c.ys, c.params)
        res_bad, _, _ = pvi_residual(c.xs, c.ys + 1e-3, c.params)
        assert res_bad > 100 * res

    def test_chart_independence(self):
        rng = np.random.default_rng(6)
        phi0 = big_sigma_draw(rng)
        xs = [0.2, 0.25, 0.3]
        c1 = pvi_curve(phi0, xs)
        c2 = pvi_curve(phi0, xs, z_pair=(2.0, 0.5))
        assert np.max(np.abs(c1.ys - c2.ys)) < 1e-8


class TestJimbo:
    def test_sigma_sign_and_exclusions(self):
        rng = np.random.default_rng(5)
        phi0 = big_sigma_draw(rng)
        sig, j = jimbo_J(phi0)
        assert 0 <= sig.real < 1
        bad = np.diag([0.1, 0.1 + 0j, 0.4]).astype(complex)
        with pytest.raises(ExcludedSigma):
            jimbo_J(bad)  # sigma = 0

    def test_structured_cancellation(self):
        # zeroing the strict lower triangle kills the 1/sigma and 1/sigma^2
        # terms entry by entry; J collapses to the bare corner quotient
        rng = np.random.default_rng(7)
        phi0 = big_sigma_draw(rng).copy()
        phi0[1, 0] = phi0[2, 0] = phi0[2, 1] = 0.0
        # triangular input needs the lexicographic frame: the dominance frame
        # lands exactly on the excluded value sigma = theta_inf + theta_3
        lam = sorted_eigs(phi0)
        sig, j = jimbo_J(phi0, lam3=lam)
        p = pvi_params(phi0, lam)
        th_inf, th_3 = p["theta_inf"], p["theta_3"]
        want = phi0[0, 2] * phi0[2, 0] / ((-th_3 + th_inf - sig) * (th_3 + th_inf - sig))
        assert abs(j - want) < 1e-12 * max(1.0, abs(want))
        assert abs(j) < 1e-12  # the corner product itself vanishes here

    def test_ratio_trend(self):
        rng = np.random.default_rng(39)
        phi0 = big_sigma_draw(rng)
        sig, j = jimbo_J(phi0)
        lamf = jimbo_frame(sorted_eigs(phi0))
        ratios = []
        for x in (1e-1, 1e-2, 1e-3):
            c = pvi_curve(phi0, [0.96 * x, 0.98 * x, x, 1.02 * x, 1.04 * x], lam3=lamf)
            i = int(np.argmin(np.abs(c.xs - x)))
            ratios.append(float(abs(c.ys[i] / (j * x ** (1 - sig)) - 1.0)))
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[-1] < 1e-2
