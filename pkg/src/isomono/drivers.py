"""Experiment drivers tying series, flow, monodromy and the oracle together.

These are the reproducible pipelines behind the CLI subcommands and the
acceptance suite: build a shrinking solution above its guaranteed radius,
carry it by the nonlinear flow to friendlier coordinates, and compare closed
formulas with the ODE oracle there.

Configurations are collinear (all u on one ray through the origin): along
such rays every direction-sensitive quantity sits at a neutral angle, where
the oracle has full accuracy, and the component R_d(J) never changes while
z_n slides along the positive reals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cmatrix import ArgCplx
from .errors import BoundaryViolated
from .flow import Path, integrate_iso
from .monodromy import CaterpillarAngles, caterpillar_nu, component_of, md_cat
from .operators import ZPoint, u_from_z
from .series import ShrinkingSolution, check_boundary

__all__ = [
    "random_boundary_value",
    "rational_fixture_matrix",
    "CollinearRun",
    "collinear_run",
    "caterpillar_check",
]


def rational_fixture_matrix(n: int, seed: int = 7) -> np.ndarray:
    """Boundary value of the rank-one rational solution.

    Built as the E_n-commutator of an outer product a b with b a = 0 and the
    normalization that makes the corner products sum to one.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    b = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    b = -b / (a @ b)
    av = np.concatenate([a, [1.0]])
    bv = np.concatenate([b, [1.0]])
    en = np.zeros((n, n), dtype=complex)
    en[n - 1, n - 1] = 1.0
    m = np.outer(av, bv)
    return en @ m - m @ en


def random_boundary_value(
    n: int,
    rng,
    gap_scale: float = 0.1,
    eps: float = 0.2,
    nonres_margin: float = 0.12,
    max_tries: int = 500,
) -> np.ndarray:
    """Draw a boundary value with modest real eigenvalue gaps.

    All leading blocks have |Re| gaps below 1 - eps, pairwise-distinct
    eigenvalues, and no gap within ``nonres_margin`` of a nonzero integer
    (so every Gamma formula downstream is well inside its domain).
    """
    for _ in range(max_tries):
        a = gap_scale * rng.standard_normal((n, n)) + 1j * gap_scale * rng.standard_normal((n, n))
        a = a + np.diag(0.3j * rng.standard_normal(n))
        ok, gaps = check_boundary(a, eps)
        if not ok:
            continue
        fine = True
        for k in range(1, n + 1):
            lam = np.linalg.eigvals(a[:k, :k])
            for i in range(k):
                for j in range(k):
                    if i == j:
                        continue
                    g = lam[i] - lam[j]
                    if abs(g) < 0.05 or (abs(g.imag) < nonres_margin and
                                         abs(g.real - round(g.real)) < nonres_margin and
                                         round(g.real) != 0):
                        fine = False
        if fine:
            return a
    raise BoundaryViolated("could not draw an admissible boundary value")


@dataclass
class CollinearRun:
    """A shrinking solution evaluated far out and carried to modest z_n."""

    phi0: np.ndarray
    sol: ShrinkingSolution
    zp_far: ZPoint
    phi_far: np.ndarray
    zp_near: ZPoint
    phi_near: np.ndarray
    angles: CaterpillarAngles
    d: float
    theta_v: float


def collinear_run(
    phi0: np.ndarray,
    theta_v: float = 0.3,
    z_end: float = 8.0,
    eps: float = 0.2,
    flow_tol: float = 1e-12,
    z_far: float | None = None,
) -> CollinearRun:
    """Sum the series far out on the collinear ray and flow z_n down to z_end.

    u_k = t_k e^{i theta_v} with t = (1, 2, 2 + z_n); the whole ray stays in
    the component R_d(J) with J = {1, .., n-1} for d = -pi/2 - theta_v, and
    every connection matrix in the caterpillar product is evaluated exactly
    at -pi/2.  The summation point defaults to a tail-certified multiple of
    the empirical convergence scale: far enough for fast convergence, close
    enough that the power-conjugation factors stay well conditioned.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    n = phi0.shape[0]
    sol = ShrinkingSolution(n, phi0, eps=eps)
    probe = [ArgCplx(1.0, theta_v)] + [ArgCplx(1.0, 0.0)] * (n - 1)
    zp_probe = ZPoint(n, tuple(probe))
    if z_far is None:
        emp = 1.0
        for k in range(3, n + 1):
            lvl = sol.level(zp_probe, k)
            lvl.extend(max(lvl.order, 4))
            a0n = max(lvl.coeffs[0][1].norm(), 1e-300)
            for m in range(1, lvl.order + 1):
                cn = lvl.coeffs[m][1].norm()
                if cn > 0:
                    emp = max(emp, (cn / a0n) ** (1.0 / m))
        z_far = max(60.0 * emp, 4.0 * z_end, 300.0)
    zs = list(probe)
    zs[n - 1] = ArgCplx(z_far, 0.0)
    zp_far = ZPoint(n, tuple(zs))
    phi_far = phi0
    for k in range(1, n + 1):
        phi_far = sol.level(zp_far, k).evaluate(zp_far.z[k - 1], 1e-12)
    path = Path("z", n, complex(z_far), complex(z_end), mode="log", arg=0.0)
    traj = integrate_iso(zp_far, phi_far, path, tol=flow_tol)
    phi_near = traj.phis[-1]
    zs[n - 1] = ArgCplx(z_end, 0.0)
    zp_near = ZPoint(n, tuple(zs))
    d = -math.pi / 2 - theta_v
    up = u_from_z(zp_near)
    component_of(up, d)  # sanity: the configuration is admissible
    angles = CaterpillarAngles.from_upoint(up, d)
    return CollinearRun(
        phi0=phi0,
        sol=sol,
        zp_far=zp_far,
        phi_far=phi_far,
        zp_near=zp_near,
        phi_near=phi_near,
        angles=angles,
        d=d,
        theta_v=theta_v,
    )


def caterpillar_check(phi0: np.ndarray, theta_v: float = 0.3, z_end: float = 8.0,
                      eps: float = 0.2) -> dict:
    """Compare the caterpillar product with the oracle monodromy.

    Returns the two monodromy factors, their difference, and the oracle's
    internal two-route discrepancy, all at the transported configuration.
    """
    from .oracle import monodromy_numeric

    run = collinear_run(phi0, theta_v=theta_v, z_end=z_end, eps=eps)
    nu_formula = caterpillar_nu(run.phi0, run.angles)
    up = u_from_z(run.zp_near)
    est = monodromy_numeric(up.u, run.phi_near, run.d)
    return {
        "nu_formula": nu_formula,
        "nu_oracle": est.nu,
        "difference": float(np.linalg.norm(nu_formula - est.nu, ord=2)),
        "oracle_discrepancy": est.discrepancy,
        "run": run,
        "md": md_cat(run.phi0, run.angles),
    }
