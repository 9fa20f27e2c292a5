"""The Painleve VI bridge for 3 x 3 solutions.

A solution value Phi(u) in the chart x = (u_2 - u_1)/(u_3 - u_1) maps to a
Painleve VI transcendent y(x); the parameters come from the eigenvalues and
the diagonal, both first integrals of the flow.  The equation residual on a
grid acts as the acceptance gate, and the small-x coefficient of
y ~ J x^{1 - sigma} is computed from the boundary value directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cmatrix import ArgCplx, eigvals
from .errors import ExcludedSigma, SingularSample
from .flow import Path, integrate_iso
from .operators import ZPoint
from .series import ShrinkingSolution

__all__ = [
    "harnad_y",
    "pvi_params",
    "pvi_residual",
    "jimbo_J",
    "pvi_curve",
    "sorted_eigs",
]


def sorted_eigs(phi) -> np.ndarray:
    lam = eigvals(np.asarray(phi, dtype=complex))
    return lam[np.lexsort((lam.imag, lam.real))]


def harnad_y(phi3, lam3, x: complex, den_tol: float = 1e-12) -> tuple[complex, complex, complex]:
    """The transcendent value y(x) of a 3 x 3 solution value, with (R, v).

    ``lam3`` fixes the eigenvalue order (the choice moves y by a birational
    transformation); denominators below ``den_tol`` raise.
    """
    p = np.asarray(phi3, dtype=complex)
    l2, l3 = lam3[1], lam3[2]
    den_v = (l2 - p[0, 0]) * (l2 - p[1, 1]) - p[0, 1] * p[1, 0]
    if abs(den_v) < den_tol:
        raise ExcludedSigma("degenerate ordering: the v-denominator vanishes")
    v = (p[0, 1] * p[1, 2] * p[2, 0] + (l2 - p[1, 1]) * p[0, 2] * p[2, 0]) / den_v
    den_r = l3 - p[0, 0] + v
    if abs(v) < den_tol or abs(den_r) < den_tol:
        raise ExcludedSigma("degenerate ordering: an R-denominator vanishes")
    r = (l3 - p[2, 2] + (p[0, 2] * p[2, 0] - (l3 - p[0, 0]) * (l3 - p[2, 2])) / den_r) / v
    y = x / (x + (1.0 - x) * r)
    return y, r, v


def pvi_params(phi, lam3=None) -> dict:
    """Painleve VI parameters from the diagonal and eigenvalues.

    Both are first integrals, so any solution value along the flow gives the
    same numbers.
    """
    p = np.asarray(phi, dtype=complex)
    lam = sorted_eigs(p) if lam3 is None else np.asarray(lam3, dtype=complex)
    th_inf = lam[0] - lam[1]
    th_1 = lam[2] - p[0, 0]
    th_3 = lam[2] - p[2, 2]
    th_2 = lam[2] - p[1, 1]
    return {
        "alpha": (th_inf - 1.0) ** 2 / 2.0,
        "beta": -(th_1**2) / 2.0,
        "gamma": th_3**2 / 2.0,
        "delta": (1.0 - th_2**2) / 2.0,
        "theta_inf": th_inf,
        "theta_1": th_1,
        "theta_2": th_2,
        "theta_3": th_3,
    }


def pvi_rhs(x: complex, y: complex, yp: complex, params: dict) -> complex:
    """Right side of the second-order Painleve VI equation."""
    a, b = params["alpha"], params["beta"]
    g, dl = params["gamma"], params["delta"]
    t1 = 0.5 * (1.0 / y + 1.0 / (y - 1.0) + 1.0 / (y - x)) * yp**2
    t2 = (1.0 / x + 1.0 / (x - 1.0) + 1.0 / (y - x)) * yp
    t3 = (
        y * (y - 1.0) * (y - x) / (x**2 * (x - 1.0) ** 2)
        * (a + b * x / y**2 + g * (x - 1.0) / (y - 1.0) ** 2 + dl * x * (x - 1.0) / (y - x) ** 2)
    )
    return t1 - t2 + t3


def pvi_residual(xs, ys, params: dict) -> tuple[float, list[float], float]:
    """Max and pointwise residual of the equation on a uniform grid.

    Fourth-order central differences for y' and y''; the two outermost points
    on each side carry no residual.  Points with y near 0, 1 or x are
    rejected.  The third return is the natural equation scale (the largest
    |y''| + |rhs| over the grid) for relative comparisons.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=complex)
    if len(xs) < 5:
        raise ValueError("need at least five samples")
    h = xs[1] - xs[0]
    if np.max(np.abs(np.diff(xs) - h)) > 1e-9 * abs(h):
        raise ValueError("grid must be uniform")
    out = []
    scale = 0.0
    for i in range(2, len(xs) - 2):
        x, y = xs[i], ys[i]
        if min(abs(y), abs(y - 1.0), abs(y - x)) < 1e-9:
            raise SingularSample(f"sample at x = {x} touches a singular locus")
        yp = (-ys[i + 2] + 8 * ys[i + 1] - 8 * ys[i - 1] + ys[i - 2]) / (12 * h)
        ypp = (-ys[i + 2] + 16 * ys[i + 1] - 30 * ys[i] + 16 * ys[i - 1] - ys[i - 2]) / (
            12 * h**2
        )
        rhs = pvi_rhs(x, y, yp, params)
        out.append(abs(ypp - rhs))
        scale = max(scale, abs(ypp) + abs(rhs))
    return max(out), out, scale


def jimbo_frame(lam3) -> np.ndarray:
    """Eigenvalue order for the small-x asymptotics.

    Puts the largest real part first and the smallest second, which
    maximizes Re(theta_inf) and with it the dominance margin of the leading
    x^{1 - sigma} term over the competing powers.
    """
    lam3 = np.asarray(lam3, dtype=complex)
    hi = int(np.argmax(lam3.real))
    lo = int(np.argmin(lam3.real))
    if hi == lo:
        hi, lo = 0, 1
    mid = ({0, 1, 2} - {hi, lo}).pop()
    return lam3[[hi, lo, mid]]


def jimbo_J(phi0, lam3=None) -> tuple[complex, complex]:
    """sigma and the leading small-x coefficient J of y ~ J x^{1 - sigma}.

    sigma is the eigenvalue gap of the leading 2 x 2 block ordered so that
    0 <= Re sigma < 1; excluded values (0 and theta_inf -+ theta_3) raise.
    ``lam3`` fixes the transcendent's frame and defaults to
    :func:`jimbo_frame`.
    """
    p = np.asarray(phi0, dtype=complex)
    lam2 = eigvals(p[:2, :2])
    sigma = lam2[0] - lam2[1]
    if sigma.real < 0:
        sigma = -sigma
    if not sigma.real < 1.0:
        raise ExcludedSigma(f"Re sigma = {sigma.real:.4f} is not below 1")
    lam3 = jimbo_frame(sorted_eigs(p)) if lam3 is None else np.asarray(lam3, dtype=complex)
    params = pvi_params(p, lam3)
    th_inf, th_3 = params["theta_inf"], params["theta_3"]
    for bad in (0.0, th_inf + th_3, th_inf - th_3):
        if abs(sigma - bad) < 1e-6:
            raise ExcludedSigma(f"sigma = {sigma:.6g} is an excluded value")
    num = p[0, 2] * p[2, 0]
    num += 2.0 * (p[0, 2] * p[2, 1] * p[1, 0] - p[0, 1] * p[1, 2] * p[2, 0]) / sigma
    num -= (
        ((p[0, 0] - p[1, 1]) * p[0, 2] + 2.0 * p[0, 1] * p[1, 2])
        * ((p[0, 0] - p[1, 1]) * p[2, 0] + 2.0 * p[2, 1] * p[1, 0])
        / sigma**2
    )
    j = num / ((-th_3 + th_inf - sigma) * (th_3 + th_inf - sigma))
    return sigma, j


@dataclass
class PviCurve:
    xs: np.ndarray
    ys: np.ndarray
    params: dict
    lam3: np.ndarray
    phis: list


def pvi_curve(phi0, xs, eps: float = 0.2, flow_tol: float = 1e-11,
              z_pair=None, lam3=None, z_far: float | None = None) -> PviCurve:
    """y(x) of the shrinking solution along a decreasing z_3 sweep.

    Default chart u = (1, 2, 1 + 1/x), i.e. z = (1, 1, 1/x - 1): the series
    is summed far out on the positive z_3 axis and the nonlinear flow carries
    the value down through the requested x samples (largest x last).  The
    summation point sits at a tail-estimate-certified multiple of the
    empirical convergence scale (the guaranteed radius would push the
    conjugation factors beyond double-precision reach).  ``z_pair`` overrides
    (z_1, z_2) for chart-independence checks; ``lam3`` fixes the
    transcendent's eigenvalue frame.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    xs = np.asarray(sorted(xs, reverse=True), dtype=float)
    z3s = 1.0 / xs - 1.0  # increasing
    z1, z2 = z_pair if z_pair is not None else (1.0, 1.0)
    sol = ShrinkingSolution(3, phi0, eps=eps)
    if z_far is None:
        zp_probe = ZPoint.from_values([z1, z2, max(z3s[-1], 1.0)])
        lvl = sol.level(zp_probe, 3)
        lvl.extend(max(lvl.order, 4))
        a0n = max(lvl.coeffs[0][1].norm(), 1e-300)
        emp = 1.0
        for m in range(1, lvl.order + 1):
            cn = lvl.coeffs[m][1].norm()
            if cn > 0:
                emp = max(emp, (cn / a0n) ** (1.0 / m))
        z_far = max(40.0 * emp, 6.0 * z3s[-1], 200.0)
    zp_far = ZPoint(3, (ArgCplx(z1, 0.0), ArgCplx(z2, 0.0), ArgCplx(z_far, 0.0)))
    phi = phi0
    for k in range(1, 4):
        phi = sol.level(zp_far, k).evaluate(zp_far.z[k - 1], sol.tol)
    lam3 = sorted_eigs(phi0) if lam3 is None else np.asarray(lam3, dtype=complex)
    phis = []
    z_cur = z_far
    for z3 in z3s[::-1]:  # walk down from z_far: x = 1/(1+z_3) increases
        path = Path("z", 3, complex(z_cur), complex(z3), mode="log", arg=0.0)
        traj = integrate_iso(zp_far, phi, path, tol=flow_tol)
        phi = traj.phis[-1]
        z_cur = z3
        phis.append(phi)
    xs_sorted = xs[::-1]  # increasing x, aligned with the collected values
    ys = []
    for x, p in zip(xs_sorted, phis):
        y, _, _ = harnad_y(p, lam3, x)
        ys.append(y)
    return PviCurve(
        xs=xs_sorted,
        ys=np.asarray(ys, dtype=complex),
        params=pvi_params(phi0, lam3),
        lam3=lam3,
        phis=phis,
    )
