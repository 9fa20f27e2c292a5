"""Inverse monodromy: from (V, sigma_n, Lambda) back to the boundary value.

The reconstruction runs in the caterpillar frame theta = 0, d = -pi/2 and is
certified a posteriori: the rebuilt matrix must reproduce the input monodromy
factor, so no silently wrong branch can escape.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .cmatrix import eigvals, expm, loggamma, spectral
from .errors import CertificationFailed, ConditionViolated, InconsistentInput
from .monodromy import CaterpillarAngles, MonodromyData, caterpillar_nu, connection_Ek, md_cat
from .operators import UPoint

__all__ = ["branch_sequence", "solve_phi0", "is_generic"]


def branch_sequence(c, s: complex, tol: float = 1e-9) -> list[complex]:
    """Logarithms lambda_j of c_j with sum s and |Re| gaps at most 1.

    Starts from principal logarithms, distributes the integer defect of the
    sum, then repeatedly shifts the extreme real parts by +-1; the iteration
    terminates because the largest gap (then the count of extremes) strictly
    decreases.
    """
    c = [complex(x) for x in c]
    s = complex(s)
    prod = 1.0 + 0.0j
    for x in c:
        prod *= x
    if abs(prod - cmath.exp(2j * math.pi * s)) > tol * max(1.0, abs(cmath.exp(2j * math.pi * s))):
        raise InconsistentInput("e^{2 pi i s} does not match the product of the entries")
    lam = [cmath.log(x) / (2j * math.pi) for x in c]
    defect = s - sum(lam)
    m = round(defect.real)
    if abs(defect - m) > 1e-7 * max(1.0, abs(s)):
        raise InconsistentInput(f"sum defect {defect:.3g} is not an integer")
    k = len(lam)
    base, extra = divmod(abs(m), k)
    for j in range(k):
        shift = base + (1 if j < extra else 0)
        lam[j] += math.copysign(shift, m) if m != 0 else 0.0
    for _ in range(10000):
        re = [x.real for x in lam]
        jmax = max(range(k), key=lambda j: re[j])
        jmin = min(range(k), key=lambda j: re[j])
        if re[jmax] - re[jmin] <= 1.0 + 1e-12:
            return lam
        lam[jmax] -= 1.0
        lam[jmin] += 1.0
    raise InconsistentInput("branch shifting did not terminate")


def _check_within_one(lam, strict: bool = False) -> bool:
    k = len(lam)
    for i in range(k):
        for j in range(k):
            g = abs((lam[i] - lam[j]).real)
            if g > 1.0 + 1e-12 or (strict and g >= 1.0 - 1e-12):
                return False
    return True


def _nonres_within(lam, what: str):
    for i in range(len(lam)):
        for j in range(len(lam)):
            if i == j:
                continue
            g = lam[i] - lam[j]
            if abs(g.imag) < 1e-9 and abs(g.real - round(g.real)) < 1e-9 and round(g.real) != 0:
                raise ConditionViolated(f"{what}: gap {g:.6g} is a non-zero integer")


def _block_gamma(block: np.ndarray, f) -> np.ndarray:
    """A scalar function applied to a small block via its spectral data."""
    if block.shape[0] == 1:
        return np.array([[f(block[0, 0])]], dtype=complex)
    return spectral(block).fun(f)


def solve_phi0(v, sigma_n, lam_diag, tol: float = 1e-8) -> np.ndarray:
    """Reconstruct the boundary value from (V, sigma_n, Lambda).

    Works block by block: the eigenvalue logarithms of each leading V-block
    come from :func:`branch_sequence`, the new column and row from the
    Gamma-quotient formulas, in the frame theta = 0, d = -pi/2.  The result
    is certified by recomputing its caterpillar monodromy factor.
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[0]
    lam_diag = np.asarray(lam_diag, dtype=complex)
    if lam_diag.ndim == 2:
        lam_diag = np.diag(lam_diag)
    sigma_n = [complex(x) for x in sigma_n]
    d = -math.pi / 2

    sigmas: dict[int, list[complex]] = {n: sigma_n}
    for k in range(1, n):
        ck = eigvals(v[:k, :k])
        sk = sum(lam_diag[:k])
        sigmas[k] = branch_sequence(list(ck), sk)
        if not _check_within_one(sigmas[k]):
            raise ConditionViolated(f"no admissible branch for block {k}")
    for k in range(1, n):
        _nonres_within(sigmas[k], f"sigma_{k}")
        for l1 in sigmas[k + 1]:
            for l2 in sigmas[k]:
                g = l1 - l2
                if abs(g.imag) < 1e-9 and abs(g.real - round(g.real)) < 1e-9 and round(g.real) != 0:
                    raise ConditionViolated(
                        f"cross-level gap {g:.6g} between blocks {k+1} and {k} is a non-zero integer"
                    )
    # eigenvalue consistency of the given sigma_n with V
    lam_v = np.sort_complex(eigvals(v))
    want = np.sort_complex(np.array([cmath.exp(2j * math.pi * x) for x in sigma_n]))
    if np.max(np.abs(lam_v - want)) > 1e-6 * max(1.0, float(np.max(np.abs(want)))):
        raise ConditionViolated("e^{2 pi i sigma_n} does not match the spectrum of V")

    phi = np.array([[lam_diag[0]]], dtype=complex)
    for k in range(2, n + 1):
        lam_k = sigmas[k]
        lam_km1 = sigmas[k - 1]
        # connection product of the reconstructed (k-1)-block and its inverse
        c_prod = np.eye(k - 1, dtype=complex)
        c_prod_inv = np.eye(k - 1, dtype=complex)
        for j in range(1, k):
            cj, cj_inv = connection_Ek(j, phi, d)
            c_prod = c_prod @ cj
            c_prod_inv = cj_inv @ c_prod_inv
        col_v = v[: k - 1, k - 1]
        row_v = v[k - 1, : k - 1]
        gcol = _block_gamma(
            phi,
            lambda x: cmath.exp(
                sum(loggamma(1.0 + x - l) for l in lam_k)
                - sum(loggamma(1.0 + x - l) for l in lam_km1)
            ),
        )
        grow = _block_gamma(
            phi,
            lambda x: cmath.exp(
                sum(loggamma(1.0 + l - x) for l in lam_k)
                - sum(loggamma(1.0 + l - x) for l in lam_km1)
            ),
        )
        e_m2pi = expm(-2j * math.pi * phi)
        e_mix = expm(-1j * math.pi * (phi + lam_diag[k - 1] * np.eye(k - 1)))
        new_col = (gcol / (2j * math.pi)) @ e_m2pi @ c_prod_inv @ col_v
        new_row = row_v @ c_prod @ e_mix @ (grow / (2j * math.pi))
        nxt = np.zeros((k, k), dtype=complex)
        nxt[: k - 1, : k - 1] = phi
        nxt[: k - 1, k - 1] = new_col
        nxt[k - 1, : k - 1] = new_row
        nxt[k - 1, k - 1] = lam_diag[k - 1]
        got = np.sort_complex(eigvals(nxt))
        want_k = np.sort_complex(np.array(lam_k))
        if np.max(np.abs(got - want_k)) > 1e-6 * max(1.0, float(np.max(np.abs(want_k)))):
            raise ConditionViolated(
                f"reconstructed block {k} has spectrum {got}, expected {want_k}"
            )
        phi = nxt

    angles = CaterpillarAngles.frame(n, d)
    nu = caterpillar_nu(phi, angles)
    resid = float(np.linalg.norm(nu - v, ord=2))
    if resid > tol * max(1.0, float(np.linalg.norm(v, ord=2))):
        raise CertificationFailed(f"certification residual {resid:.3g} exceeds {tol:.3g}")
    return phi


def is_generic(md: MonodromyData, up: UPoint, d: float) -> tuple[bool, dict, dict]:
    """Test the genericity conditions that certify a shrinking solution.

    Checks, in order: the ordering Im(u_1 e^{id}) > ... > Im(u_n e^{id}),
    non-resonance of sigma_n, existence of branch sequences with strict
    |Re| gaps below 1 for every leading block of nu, and the cross-level
    non-integrality.  Returns (verdict, branch sequences, diagnostics).
    """
    n = up.n
    diags: dict = {}
    im = [(ui * cmath.exp(1j * d)).imag for ui in up.u]
    ordered = all(im[i] > im[i + 1] for i in range(n - 1))
    diags["u_ordering"] = ordered
    if not ordered:
        return False, {}, diags
    sigma_n = [complex(x) for x in md.sigma]
    try:
        _nonres_within(sigma_n, "sigma_n")
        diags["sigma_n_nonresonant"] = True
    except ConditionViolated as exc:
        diags["sigma_n_nonresonant"] = False
        diags["reason"] = str(exc)
        return False, {}, diags
    sigmas = {n: sigma_n}
    for k in range(1, n):
        try:
            ck = eigvals(md.nu[:k, :k])
            sk = sum(md.lam[j, j] for j in range(k))
            cand = branch_sequence(list(ck), sk)
        except InconsistentInput as exc:
            diags["reason"] = f"block {k}: {exc}"
            return False, sigmas, diags
        if not _check_within_one(cand, strict=True):
            diags["reason"] = f"block {k}: no strict branch sequence"
            return False, sigmas, diags
        sigmas[k] = cand
    for k in range(1, n):
        for l1 in sigmas[k + 1]:
            for l2 in sigmas[k]:
                g = l1 - l2
                if (
                    abs(g.imag) < 1e-9
                    and abs(g.real - round(g.real)) < 1e-9
                    and round(g.real) != 0
                ):
                    diags["reason"] = f"cross-level gap {g:.4g} at block {k} is a non-zero integer"
                    return False, sigmas, diags
    diags["reason"] = "all conditions hold"
    return True, sigmas, diags
