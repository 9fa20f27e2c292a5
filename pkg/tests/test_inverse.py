"""Tests for branch selection, boundary-value reconstruction and genericity."""

import cmath
import itertools
import math

import numpy as np
import pytest

from isomono.drivers import random_boundary_value
from isomono.errors import CertificationFailed, ConditionViolated, InconsistentInput, IsomonoError
from isomono.inverse import branch_sequence, is_generic, solve_phi0
from isomono.monodromy import CaterpillarAngles, md_cat
from isomono.operators import ZPoint, u_from_z
from isomono.cmatrix import ArgCplx


class TestBranchSequence:
    def test_trivial(self):
        out = branch_sequence([1.0, 1.0], 0.0)
        assert np.allclose(out, [0.0, 0.0])

    def test_single_entry(self):
        out = branch_sequence([cmath.exp(0.8j * math.pi)], 0.4)
        assert abs(out[0] - 0.4) < 1e-12

    def test_one_shift(self):
        # principal logs give (0.9, -0.9); one max/min shift lands (-0.1, 0.1)
        c = [cmath.exp(1.8j * math.pi), cmath.exp(-1.8j * math.pi)]
        out = branch_sequence(c, 0.0)
        assert np.allclose(sorted(x.real for x in out), [-0.1, 0.1], atol=1e-12)

    def test_inconsistent_raises(self):
        with pytest.raises(InconsistentInput):
            branch_sequence([1.0, 1.0], 0.25)

    def test_constraints_hold_random(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            lam = rng.standard_normal(4) * 2.0 + 1j * rng.standard_normal(4)
            c = [cmath.exp(2j * math.pi * x) for x in lam]
            s = sum(lam)
            out = branch_sequence(c, s)
            assert abs(sum(out) - s) < 1e-8
            for x, cx in zip(out, c):
                assert abs(cmath.exp(2j * math.pi * x) - cx) < 1e-8 * max(1.0, abs(cx))
            for x, y in itertools.combinations(out, 2):
                assert abs((x - y).real) <= 1.0 + 1e-9

    def test_uniqueness_under_strict_gaps(self):
        # exhaustive integer shifts find no second admissible sequence
        rng = np.random.default_rng(4)
        for _ in range(10):
            lam = 0.4 * rng.standard_normal(3) + 1j * rng.standard_normal(3)
            if max(abs((a - b).real) for a in lam for b in lam) >= 0.98:
                continue
            c = [cmath.exp(2j * math.pi * x) for x in lam]
            out = branch_sequence(c, sum(lam))
            found = []
            for shifts in itertools.product(range(-3, 4), repeat=3):
                if sum(shifts) != 0:
                    continue
                cand = [x + s for x, s in zip(out, shifts)]
                ok = all(
                    abs((a - b).real) < 1.0 - 1e-12
                    for a in cand
                    for b in cand
                )
                if ok:
                    found.append(cand)
            assert len(found) <= 1


class TestSolvePhi0:
    def test_diagonal(self):
        lam = np.diag([0.2, -0.35, 0.12]).astype(complex)
        v = np.diag(np.exp(2j * math.pi * np.diag(lam)))
        phi0 = solve_phi0(v, list(np.diag(lam)), lam)
        assert np.linalg.norm(phi0 - lam) < 1e-10

    def test_round_trip_n3(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            phi0 = random_boundary_value(3, rng)
            md = md_cat(phi0, CaterpillarAngles.frame(3))
            rec = solve_phi0(md.nu, list(md.sigma), md.lam)
            assert np.linalg.norm(rec - phi0) < 1e-8

    def test_round_trip_n4(self):
        rng = np.random.default_rng(123)
        for _ in range(3):
            phi0 = random_boundary_value(4, rng)
            md = md_cat(phi0, CaterpillarAngles.frame(4))
            rec = solve_phi0(md.nu, list(md.sigma), md.lam)
            assert np.linalg.norm(rec - phi0) < 1e-8

    def test_rational_data_rejected(self):
        # identity monodromy with the resonant spectrum is out of reach
        with pytest.raises(IsomonoError):
            solve_phi0(np.eye(3), [1.0, -1.0, 0.0], np.zeros((3, 3)))

    def test_certification_catches_wrong_input(self):
        rng = np.random.default_rng(7)
        phi0 = random_boundary_value(3, rng)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        bad = md.nu.copy()
        bad[0, 1] *= 1.2
        bad[1, 0] /= 1.2  # keeps the determinant conditions roughly alive
        with pytest.raises(IsomonoError):
            solve_phi0(bad, list(md.sigma), md.lam)

    def test_injectivity_at_desk_scale(self):
        rng = np.random.default_rng(8)
        a = random_boundary_value(3, rng)
        b = random_boundary_value(3, rng)
        md_a = md_cat(a, CaterpillarAngles.frame(3))
        md_b = md_cat(b, CaterpillarAngles.frame(3))
        gap = max(
            float(np.max(np.abs(md_a.nu - md_b.nu))),
            float(np.max(np.abs(np.array(md_a.sigma) - np.array(md_b.sigma)))),
            float(np.max(np.abs(md_a.lam - md_b.lam))),
        )
        assert gap > 1e-6


class TestIsGeneric:
    @staticmethod
    def _collinear_up(n=3, theta_v=0.3):
        zs = [ArgCplx(1.0, theta_v)] + [ArgCplx(1.0, 0.0)] * (n - 1)
        return u_from_z(ZPoint(n, tuple(zs)))

    def test_diagonal_true(self):
        phi0 = np.diag([0.21, -0.13 + 0.4j, 0.37]).astype(complex)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        up = self._collinear_up()
        ok, sigmas, diags = is_generic(md, up, -math.pi / 2 - 0.3)
        assert ok, diags

    def test_random_boundary_true_and_matches(self):
        rng = np.random.default_rng(10)
        phi0 = random_boundary_value(3, rng)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        up = self._collinear_up()
        ok, sigmas, diags = is_generic(md, up, -math.pi / 2 - 0.3)
        assert ok, diags
        for k in (1, 2):
            want = np.sort_complex(np.linalg.eigvals(phi0[:k, :k]))
            got = np.sort_complex(np.array(sigmas[k]))
            assert np.max(np.abs(want - got)) < 1e-8

    def test_integer_gap_fails(self):
        phi0 = np.diag([0.21, -0.13 + 0.4j, 0.37]).astype(complex)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        bad = MonkeySigma = list(md.sigma)
        bad[0] = bad[1] + 1.0  # integer gap in sigma_n
        from isomono.monodromy import MonodromyData

        md_bad = MonodromyData(nu=md.nu, sigma=tuple(bad), lam=md.lam)
        ok, _, diags = is_generic(md_bad, self._collinear_up(), -math.pi / 2 - 0.3)
        assert not ok and not diags["sigma_n_nonresonant"]

    def test_wrong_ordering_fails(self):
        phi0 = np.diag([0.21, -0.13 + 0.4j, 0.37]).astype(complex)
        md = md_cat(phi0, CaterpillarAngles.frame(3))
        up = self._collinear_up(theta_v=0.3)
        ok, _, diags = is_generic(md, up, +math.pi / 2 - 0.3)  # reversed rotation
        assert not ok and not diags["u_ordering"]
