"""Closed-form Stokes and connection matrices, and the caterpillar product.

All formulas below express monodromy data of the linear system with
coefficients (E_k, delta_k A) through Gamma functions of the leading blocks
of A, with direction-dependent integer windows: q_even(d) is the even integer
q with |d - q pi| < pi, q_odd(d) the odd one.  Boundary hits of these windows
are rejected, never rounded.

The caterpillar product assembles the full monodromy factor of the nonlinear
flow's linear system out of one-step connection matrices; it is inverted in
the ``inverse`` module.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .cmatrix import expm, loggamma, spectral
from .errors import (
    NonConvergence,
    OnAntiStokes,
    QSelectionAmbiguous,
    Resonant,
    SharedEigenvalue,
    SingularMinor,
)
from .operators import UPoint, delta_k

__all__ = [
    "StokesPair",
    "MonodromyData",
    "CaterpillarAngles",
    "q_even",
    "q_odd",
    "stokes_Ek",
    "connection_Ek",
    "caterpillar_nu",
    "md_cat",
    "lu_split",
    "stokes_entries",
    "diag_via_minors",
    "relation_suite",
    "component_of",
]

_GUARD = 1e-10


def q_even(d: float) -> int:
    q = 2 * round(d / (2 * math.pi))
    if abs(d - q * math.pi) >= math.pi - _GUARD:
        raise QSelectionAmbiguous(f"direction {d} sits on an even-window boundary")
    return q


def q_odd(d: float) -> int:
    q = 2 * math.floor(d / (2 * math.pi)) + 1
    if not (abs(d - q * math.pi) < math.pi - _GUARD):
        raise QSelectionAmbiguous(f"direction {d} sits on an odd-window boundary")
    return q


@dataclass(frozen=True)
class StokesPair:
    """Unit-diagonal Stokes factors with their formal-monodromy generator."""

    s_plus: np.ndarray
    s_minus: np.ndarray
    formal_diag: np.ndarray
    direction: float


@dataclass(frozen=True)
class MonodromyData:
    """The first-integral triple (nu, sigma, Lambda) of the linear system."""

    nu: np.ndarray
    sigma: tuple
    lam: np.ndarray

    def check(self, tol: float = 1e-8) -> float:
        """Largest violation of the defining consistency conditions."""
        n = self.nu.shape[0]
        worst = 0.0
        lam_nu = np.sort_complex(np.linalg.eigvals(self.nu))
        want = np.sort_complex(np.array([cmath.exp(2j * math.pi * s) for s in self.sigma]))
        worst = max(worst, float(np.max(np.abs(lam_nu - want))))
        for k in range(1, n + 1):
            det_k = np.linalg.det(self.nu[:k, :k])
            tr = sum(self.lam[j, j] for j in range(k))
            worst = max(worst, abs(det_k - cmath.exp(2j * math.pi * tr)))
        return worst


@dataclass(frozen=True)
class CaterpillarAngles:
    """Base direction d and per-step angles theta_k on the universal cover."""

    d: float
    theta: tuple

    @staticmethod
    def frame(n: int, d: float = -math.pi / 2) -> "CaterpillarAngles":
        return CaterpillarAngles(d, (0.0,) * n)

    @staticmethod
    def from_upoint(up: UPoint, d: float) -> "CaterpillarAngles":
        return CaterpillarAngles(d, tuple(float(t) for t in up.diffargs))


def _eigs_block(a: np.ndarray, k: int) -> np.ndarray:
    from .cmatrix import eigvals

    if k == 0:
        return np.zeros(0, dtype=complex)
    return eigvals(a[:k, :k])


def _check_nonres(lam: np.ndarray, what: str, tol: float = 1e-9):
    for i in range(len(lam)):
        for j in range(len(lam)):
            if i == j:
                continue
            g = lam[i] - lam[j]
            if abs(g.imag) < tol and abs(g.real - round(g.real)) < tol and round(g.real) != 0:
                raise Resonant(f"{what}: eigenvalue gap {g:.6g} is a non-zero integer")


def _gamma_prod(x: complex, shifts) -> complex:
    """exp(sum log Gamma(1 + x - s) over s in shifts)."""
    acc = 0.0 + 0.0j
    for s in shifts:
        acc += loggamma(1.0 + x - s)
    return cmath.exp(acc)


def _is_nonpos_int(w: complex, tol: float = 1e-12) -> bool:
    return abs(w.imag) < tol and w.real < 0.5 and abs(w.real - round(w.real)) < tol


def _gamma_ratio(x: complex, num_shifts, den_shifts) -> complex:
    """prod Gamma(1 + x - s_num) / prod Gamma(1 + x - s_den), pole-aware.

    A Gamma pole in the denominator kills the ratio (value 0); matched pole
    orders are evaluated as a limit by a tiny off-axis shift.
    """
    from .errors import PoleAtEigenvalue

    np_ct = sum(_is_nonpos_int(1.0 + x - s) for s in num_shifts)
    nd_ct = sum(_is_nonpos_int(1.0 + x - s) for s in den_shifts)
    if nd_ct > np_ct:
        return 0.0 + 0.0j
    if np_ct > nd_ct:
        raise PoleAtEigenvalue(f"unbalanced Gamma pole at argument {x:.6g}")
    if np_ct:
        x = x + 1e-9
    acc = 0.0 + 0.0j
    for s in num_shifts:
        acc += loggamma(1.0 + x - s)
    for s in den_shifts:
        acc -= loggamma(1.0 + x - s)
    return cmath.exp(acc)


def _block_fun(a: np.ndarray, k: int):
    """Matrix-function evaluators on the (k-1) x (k-1) leading block.

    Diagonal blocks with repeated entries (the rational fixture) go through
    the grouped decomposition; generic blocks need separated eigenvalues.
    """
    if k == 2:
        x0 = a[0, 0]
        left = lambda f, v: np.array([f(x0)], dtype=complex) * v
        right = lambda v, f: v * np.array([f(x0)], dtype=complex)
    else:
        from .series import spectral_grouped

        blk = spectral_grouped(a[: k - 1, : k - 1])
        left = lambda f, v: blk.fun(f) @ v
        right = lambda v, f: v @ blk.fun(f)
    return left, right


def stokes_Ek(k: int, a, d: float) -> StokesPair:
    """Stokes pair of the system with coefficients (E_k, delta_k A).

    Rank-one perturbations of the identity whose k-th column/row is built
    from Gamma functions of A^{[k-1]}; both d-window branches are covered.
    Requires A^{[k-1]} non-resonant and, for k >= 3, diagonalizable with
    separated eigenvalues.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if abs(d / math.pi - round(d / math.pi)) < _GUARD / math.pi:
        raise OnAntiStokes(f"direction {d} lies on an anti-Stokes ray")
    m = math.floor(d / math.pi)
    ascending = m % 2 == 0  # d in (2q pi, (2q+1) pi)
    q = m // 2 if ascending else (m + 1) // 2
    akk = a[k - 1, k - 1]
    splus = np.eye(n, dtype=complex)
    sminus = np.eye(n, dtype=complex)
    if k >= 2:
        lam_km1 = _eigs_block(a, k - 1)
        lam_k = _eigs_block(a, k)
        _check_nonres(lam_km1, f"A^[{k-1}]")
        left, right = _block_fun(a, k)
        col = a[: k - 1, k - 1]
        row = a[k - 1, : k - 1]
        s_col = 2j * math.pi * left(lambda x: _gamma_ratio(x, lam_km1, lam_k), col)
        s_row = 2j * math.pi * right(
            row, lambda x: _gamma_ratio(-x, [-l for l in lam_km1], [-l for l in lam_k])
        )
        if ascending:
            # S+ carries the row, S- the column
            splus[k - 1, : k - 1] = right(
                s_row, lambda x: cmath.exp((2 * q + 1) * math.pi * 1j * (x - akk))
            )
            sminus[: k - 1, k - 1] = -left(
                lambda x: cmath.exp(2 * q * math.pi * 1j * (akk - x)), s_col
            )
        else:
            # d in ((2q-1) pi, 2q pi): S+ carries the column, S- the row
            splus[: k - 1, k - 1] = left(
                lambda x: cmath.exp(2 * q * math.pi * 1j * (akk - x)), s_col
            )
            sminus[k - 1, : k - 1] = -right(
                s_row, lambda x: cmath.exp((2 * q - 1) * math.pi * 1j * (x - akk))
            )
    return StokesPair(
        s_plus=splus,
        s_minus=sminus,
        formal_diag=delta_k(delta_k(a, k), k - 1),
        direction=d,
    )

def connection_Ek(k: int, a, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Central connection matrix of (E_k, delta_k A) and its inverse.

    Both are given by left/right Gamma-operator products on the leading
    blocks, realized through double spectral expansions; the product
    C @ C_inv is verified to be the identity before returning.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    out = np.eye(n, dtype=complex)
    out_inv = np.eye(n, dtype=complex)
    if k == 1:
        return out, out_inv
    qe = q_even(d)
    qo = q_odd(d)
    lam_km1 = _eigs_block(a, k - 1)
    lam_k = _eigs_block(a, k)
    _check_nonres(lam_km1, f"A^[{k-1}]")
    _check_nonres(lam_k, f"A^[{k}]")
    akk = a[k - 1, k - 1]
    dec_k = spectral(a[:k, :k])
    if k == 2:
        projs_km1 = [np.eye(1, dtype=complex)]
        lams_km1 = [a[0, 0]]
    else:
        dec_km1 = spectral(a[: k - 1, : k - 1])
        projs_km1 = list(dec_km1.projs)
        lams_km1 = list(dec_km1.eigs)

    def gtop(x, y):
        # x runs over eigenvalues of A^{[k-1]}, y over those of A^{[k]}
        acc = qo * math.pi * 1j * (y - x)
        acc += loggamma(1.0 + x - y) + loggamma(1.0 + y - x)
        for p in lams_km1:
            acc += loggamma(1.0 + x - p) - loggamma(1.0 + y - p)
        for j in lam_k:
            acc += loggamma(1.0 + y - j) - loggamma(1.0 + x - j)
        return cmath.exp(acc)

    def hrow(y):
        acc = qe * math.pi * 1j * (y - akk)
        for j in lam_k:
            acc += loggamma(1.0 + y - j)
        for p in lams_km1:
            acc -= loggamma(1.0 + y - p)
        return cmath.exp(acc)

    emb = np.zeros((k - 1, k), dtype=complex)
    emb[:, : k - 1] = np.eye(k - 1)
    top = np.zeros((k - 1, k), dtype=complex)
    for i, pi in enumerate(projs_km1):
        for j, qj in enumerate(dec_k.projs):
            top += gtop(lams_km1[i], dec_k.eigs[j]) * (pi @ emb @ qj)
    rowk = np.zeros((1, k), dtype=complex)
    for j, qj in enumerate(dec_k.projs):
        rowk += hrow(dec_k.eigs[j]) * qj[k - 1 : k, :]
    out[:k, :k] = np.vstack([top, rowk])

    def gbot(x, y):
        # x runs over eigenvalues of A^{[k]}, y over those of A^{[k-1]}
        acc = qe * math.pi * 1j * (y - x)
        acc += loggamma(1.0 + x - y) + loggamma(1.0 + y - x)
        for p in lams_km1:
            acc += loggamma(1.0 + p - y) - loggamma(1.0 + p - x)
        for j in lam_k:
            acc += loggamma(1.0 + j - x) - loggamma(1.0 + j - y)
        return cmath.exp(acc)

    def hcol(x):
        acc = qo * math.pi * 1j * (akk - x)
        for j in lam_k:
            acc += loggamma(1.0 + j - x)
        for p in lams_km1:
            acc -= loggamma(1.0 + p - x)
        return cmath.exp(acc)

    emb2 = np.zeros((k, k - 1), dtype=complex)
    emb2[: k - 1, :] = np.eye(k - 1)
    left_cols = np.zeros((k, k - 1), dtype=complex)
    for i, qi in enumerate(dec_k.projs):
        for j, pj in enumerate(projs_km1):
            left_cols += gbot(dec_k.eigs[i], lams_km1[j]) * (qi @ emb2 @ pj)
    colk = np.zeros((k, 1), dtype=complex)
    for i, qi in enumerate(dec_k.projs):
        colk += hcol(dec_k.eigs[i]) * qi[:, k - 1 : k]
    out_inv[:k, :k] = np.hstack([left_cols, colk])

    resid = np.linalg.norm(out[:k, :k] @ out_inv[:k, :k] - np.eye(k), ord=2)
    if resid > 1e-9 * max(1.0, np.linalg.norm(out[:k, :k], ord=2) ** 2):
        raise NonConvergence(f"connection inverse check failed: residual {resid:.3g}")
    return out, out_inv


def caterpillar_nu(phi0, angles: CaterpillarAngles) -> np.ndarray:
    """Monodromy factor as a conjugated product of one-step connections.

    nu = Ad( C_{d+theta_1}(E_1, delta_1 Phi0) ... C_{d+theta_n}(E_n, Phi0) )
    of e^{2 pi i Phi0}; every leading block of Phi0 up to n-1 must be
    non-resonant and diagonalizable.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    n = phi0.shape[0]
    if len(angles.theta) != n:
        raise ValueError("need one angle per index")
    prod = np.eye(n, dtype=complex)
    prod_inv = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        c, c_inv = connection_Ek(k, phi0, angles.d + angles.theta[k - 1])
        prod = prod @ c
        prod_inv = c_inv @ prod_inv
    return prod @ expm(2j * math.pi * phi0) @ prod_inv


def md_cat(phi0, angles: CaterpillarAngles) -> MonodromyData:
    """Monodromy data triple of the caterpillar construction."""
    phi0 = np.asarray(phi0, dtype=complex)
    from .cmatrix import eigvals

    lam = eigvals(phi0)
    return MonodromyData(
        nu=caterpillar_nu(phi0, angles),
        sigma=tuple(lam),
        lam=np.diag(np.diag(phi0)),
    )


def order_from_J(n: int, J) -> list[int]:
    """Total order of Im(u_i e^{i d}) in the component labelled by J.

    Returns indices (1-based) sorted by decreasing rotated imaginary part:
    index k+1 goes below all previous ones iff k is in J.
    """
    order = [1]
    for k in range(1, n):
        if k in J:
            order.append(k + 1)
        else:
            order.insert(0, k + 1)
    return order


def component_of(up: UPoint, d: float) -> set[int]:
    """The label J with u in R_d(J); rejects u outside every component."""
    from .errors import ConditionViolated

    im = [(ui * cmath.exp(1j * d)).imag for ui in up.u]
    J: set[int] = set()
    for k in range(1, up.n):
        prev = im[:k]
        if im[k] < min(prev):
            J.add(k)
        elif im[k] > max(prev):
            continue
        else:
            raise ConditionViolated(
                f"u is not in any R_d(J) component: Im(u_{k+1} e^(id)) is interior"
            )
    return J


def lu_split(nu, delta_lambda, J, d: float | None = None, tol: float = 1e-12) -> StokesPair:
    """Split nu into unit-triangular Stokes factors for the component J.

    In the dominance order of R_d(J), S+ is unit upper triangular and S-
    unit lower triangular with nu = S_-^{-1} e^{2 pi i Lambda} S_+; the
    pivots of the elimination must match e^{2 pi i Lambda}.
    """
    nu = np.asarray(nu, dtype=complex)
    n = nu.shape[0]
    delta_lambda = np.asarray(delta_lambda, dtype=complex)
    order = order_from_J(n, set(J))
    p = np.zeros((n, n), dtype=complex)
    for i, idx in enumerate(order):
        p[i, idx - 1] = 1.0
    m = p @ nu @ p.T
    # LDU by elimination without pivoting
    lower = np.eye(n, dtype=complex)
    upper = np.eye(n, dtype=complex)
    work = m.copy()
    scale = np.linalg.norm(m, ord=2)
    diag = np.zeros(n, dtype=complex)
    for j in range(n):
        piv = work[j, j]
        if abs(piv) <= tol * max(scale, 1.0):
            raise SingularMinor(f"leading minor {j+1} of the permuted matrix vanishes")
        diag[j] = piv
        lower[j + 1 :, j] = work[j + 1 :, j] / piv
        upper[j, j + 1 :] = work[j, j + 1 :] / piv
        work[j + 1 :, j + 1 :] -= np.outer(work[j + 1 :, j], work[j, j + 1 :]) / piv
    want = np.array([cmath.exp(2j * math.pi * delta_lambda[idx - 1, idx - 1]) for idx in order])
    if np.max(np.abs(diag - want)) > 1e-6 * max(1.0, float(np.max(np.abs(want)))):
        raise SingularMinor("pivots do not match the formal monodromy e^{2 pi i Lambda}")
    s_minus = p.T @ np.linalg.inv(lower) @ p
    s_plus = p.T @ upper @ p
    return StokesPair(s_plus=s_plus, s_minus=s_minus, formal_diag=delta_lambda,
                      direction=d if d is not None else 0.0)


def diag_via_minors(a, k: int, dscalars) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Diagonalization of A^{[k]} by minor quotients, plus the mixed entries.

    Returns (P, P_inv, alpha, beta) with P^{-1} A^{[k]} P diagonal; alpha and
    beta are the conjugated blocks coupling the first k slots to the rest.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    ds = np.asarray(dscalars, dtype=complex)
    if len(ds) != k or np.any(ds == 0):
        raise ValueError("need k nonzero scale factors")
    lam_k = _eigs_block(a, k)
    lam_km1 = _eigs_block(a, k - 1)
    for i in range(k):
        for j in range(i + 1, k):
            if abs(lam_k[i] - lam_k[j]) < 1e-10:
                raise SharedEigenvalue("repeated eigenvalue in the k-block")
    for i in range(k):
        for j in range(k - 1):
            if abs(lam_k[i] - lam_km1[j]) < 1e-10:
                raise SharedEigenvalue("consecutive blocks share an eigenvalue")

    def minor(mat, rows, cols):
        sub = mat[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])]
        return np.linalg.det(sub) if sub.size else 1.0

    pmat = np.zeros((k, k), dtype=complex)
    pinv = np.zeros((k, k), dtype=complex)
    eye = np.eye(n, dtype=complex)
    for c in range(1, k + 1):
        shifted = lam_k[c - 1] * eye - a
        den = np.prod([lam_k[c - 1] - lam_km1[j] for j in range(k - 1)]) if k > 1 else 1.0
        for r in range(1, k + 1):
            rows = [x for x in range(1, k + 1) if x != k]
            cols = [x for x in range(1, k + 1) if x != r]
            pmat[r - 1, c - 1] = (-1) ** (r + k) * minor(shifted, rows, cols) / den * ds[c - 1]
    for r in range(1, k + 1):
        shifted = lam_k[r - 1] * eye - a
        den = np.prod([lam_k[r - 1] - lam_k[p] for p in range(k) if p != r - 1])
        for c in range(1, k + 1):
            rows = [x for x in range(1, k + 1) if x != c]
            cols = [x for x in range(1, k + 1) if x != k]
            pinv[r - 1, c - 1] = (-1) ** (k + c) * minor(shifted, rows, cols) / den / ds[r - 1]
    alpha = np.zeros((k, n - k), dtype=complex)
    beta = np.zeros((n - k, k), dtype=complex)
    for r in range(1, k + 1):
        shifted = lam_k[r - 1] * eye - a
        den = np.prod([lam_k[r - 1] - lam_k[p] for p in range(k) if p != r - 1])
        for c in range(k + 1, n + 1):
            rows = list(range(1, k + 1))
            cols = list(range(1, k)) + [c]
            alpha[r - 1, c - k - 1] = -minor(shifted, rows, cols) / den / ds[r - 1]
    for c in range(1, k + 1):
        shifted = lam_k[c - 1] * eye - a
        den = np.prod([lam_k[c - 1] - lam_km1[j] for j in range(k - 1)]) if k > 1 else 1.0
        for r in range(k + 1, n + 1):
            rows = list(range(1, k)) + [r]
            cols = list(range(1, k + 1))
            beta[r - k - 1, c - 1] = -minor(shifted, rows, cols) / den * ds[c - 1]
    return pmat, pinv, alpha, beta


def _lg(x: complex) -> complex:
    return loggamma(x)


def _sum_entry_upper(phi0, lams, qe, qo, j: int, k: int) -> complex:
    """Diagonalized multi-sum for the (j, k) entry of S_d, j < k (1-based)."""
    import itertools

    n = phi0.shape[0]
    total = 0.0 + 0.0j
    ranges = [range(1, s + 1) for s in range(j, k)]
    for idx in itertools.product(*ranges):
        i_of = {s: idx[s - j] for s in range(j, k)}
        expo = (qo[j - 1] - qe[j - 1]) * lams[j][i_of[j] - 1]
        for s in range(j, k):
            expo += (qe[s - 1] - qe[s]) * lams[s][i_of[s] - 1]
        expo += (qe[k - 1] - qo[k - 1]) * lams[k - 1][i_of[k - 1] - 1]
        acc = 1j * math.pi * expo
        dets = 1.0 + 0.0j
        for s in range(j, k):
            li = lams[s][i_of[s] - 1]
            for i in range(s):
                acc += _lg(1.0 + li - lams[s][i])
                if i != i_of[s] - 1:
                    acc += _lg(li - lams[s][i])
            rows = list(range(s))
            cols = list(range(s - 1)) + [s]
            sub = (li * np.eye(n) - phi0)[np.ix_(rows, cols)]
            dets *= np.linalg.det(sub) if sub.size else 1.0
        if dets == 0.0:
            continue
        lj = lams[j][i_of[j] - 1]
        for p in range(j - 1):
            acc -= _lg(1.0 + lj - lams[j - 1][p])
        for s in range(j, k - 1):
            ls, ls1 = lams[s][i_of[s] - 1], lams[s + 1][i_of[s + 1] - 1]
            for i in range(s + 1):
                if i != i_of[s + 1] - 1:
                    acc -= _lg(1.0 + ls - lams[s + 1][i])
            for i in range(s):
                if i != i_of[s] - 1:
                    acc -= _lg(1.0 + ls1 - lams[s][i])
            if abs(ls - ls1) < 1e-12:
                raise SharedEigenvalue(
                    f"blocks {s} and {s+1} share an eigenvalue inside the entry sum"
                )
            dets /= ls - ls1
        lk1 = lams[k - 1][i_of[k - 1] - 1]
        for jj in range(k):
            acc -= _lg(1.0 + lk1 - lams[k][jj])
        total += cmath.exp(acc) * dets
    return -2j * math.pi * total


def _sum_entry_lower(phi0, lams, qe, qo, j: int, k: int) -> complex:
    """Diagonalized multi-sum for the (k, j) entry of S_d, j < k (1-based)."""
    import itertools

    n = phi0.shape[0]
    total = 0.0 + 0.0j
    ranges = [range(1, s + 1) for s in range(j, k)]
    for idx in itertools.product(*ranges):
        i_of = {s: idx[s - j] for s in range(j, k)}
        expo = (qe[j - 1] - qo[j - 1]) * lams[j][i_of[j] - 1]
        for s in range(j, k):
            expo += (qe[s] - qe[s - 1]) * lams[s][i_of[s] - 1]
        expo += (qo[k - 1] - qe[k - 1]) * lams[k - 1][i_of[k - 1] - 1]
        acc = 1j * math.pi * expo
        dets = 1.0 + 0.0j
        for s in range(j, k):
            li = lams[s][i_of[s] - 1]
            for i in range(s):
                acc += _lg(1.0 + lams[s][i] - li)
                if i != i_of[s] - 1:
                    acc += _lg(lams[s][i] - li)
            rows = list(range(s - 1)) + [s]
            cols = list(range(s))
            sub = (phi0 - li * np.eye(n))[np.ix_(rows, cols)]
            dets *= np.linalg.det(sub) if sub.size else 1.0
        if dets == 0.0:
            continue
        lj = lams[j][i_of[j] - 1]
        for p in range(j - 1):
            acc -= _lg(1.0 + lams[j - 1][p] - lj)
        for s in range(j, k - 1):
            ls, ls1 = lams[s][i_of[s] - 1], lams[s + 1][i_of[s + 1] - 1]
            for i in range(s + 1):
                if i != i_of[s + 1] - 1:
                    acc -= _lg(1.0 + lams[s + 1][i] - ls)
            for i in range(s):
                if i != i_of[s] - 1:
                    acc -= _lg(1.0 + lams[s][i] - ls1)
            if abs(ls - ls1) < 1e-12:
                raise SharedEigenvalue(
                    f"blocks {s} and {s+1} share an eigenvalue inside the entry sum"
                )
            dets /= ls1 - ls
        lk1 = lams[k - 1][i_of[k - 1] - 1]
        for jj in range(k):
            acc -= _lg(1.0 + lams[k][jj] - lk1)
        total += cmath.exp(acc) * dets
    return 2j * math.pi * total


def stokes_entries(phi0, up: UPoint, d: float) -> np.ndarray:
    """The full matrix S_d = S_d^+ - S_d^- from the boundary value.

    Sub-diagonal entries use the Gamma-matrix-function form; everything
    farther out uses the diagonalized multi-sum with minor determinants.
    ``up`` must lie in one of the components R_d(J) and all its q-windows
    must be selected strictly.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    n = phi0.shape[0]
    component_of(up, d)  # validates membership
    qe = [q_even(d + up.diffargs[i]) for i in range(n)]
    qo = [q_odd(d + up.diffargs[i]) for i in range(n)]
    lams = {s: _eigs_block(phi0, s) for s in range(0, n + 1)}
    for s in range(1, n):
        _check_nonres(lams[s], f"Phi0^[{s}]")
        for i in range(s):
            for jj in range(i + 1, s):
                if abs(lams[s][i] - lams[s][jj]) < 1e-10:
                    raise SharedEigenvalue(f"repeated eigenvalue in block {s}")
    s_d = np.zeros((n, n), dtype=complex)
    for j in range(1, n):
        for k in range(j + 1, n + 1):
            if k == j + 1:
                sub_u = _subdiag_upper(phi0, lams, qo, j)
                sub_l = _subdiag_lower(phi0, lams, qo, j)
            else:
                sub_u = _sum_entry_upper(phi0, lams, qe, qo, j, k)
                sub_l = _sum_entry_lower(phi0, lams, qe, qo, j, k)
            pref_u = cmath.exp(
                1j * math.pi * (
                    qe[k - 1] * phi0[k - 1, k - 1]
                    - (qo[j - 1] - qo[k - 1] + qe[k - 1]) * phi0[j - 1, j - 1]
                )
            )
            pref_l = cmath.exp(
                1j * math.pi * (qo[j - 1] * phi0[j - 1, j - 1] - qo[k - 1] * phi0[k - 1, k - 1])
            )
            s_d[j - 1, k - 1] = pref_u * sub_u
            s_d[k - 1, j - 1] = pref_l * sub_l
    return s_d


def _subdiag_upper(phi0, lams, qo, k: int) -> complex:
    """(k, k+1) slot of S_d via the matrix-Gamma form (before its prefactor)."""
    n = phi0.shape[0]

    def f(x):
        acc = 0.0 + 0.0j
        for p in lams[k]:
            acc += 2.0 * _lg(1.0 + x - p)
        for j1 in lams[k + 1]:
            acc -= _lg(1.0 + x - j1)
        for j2 in lams[k - 1]:
            acc -= _lg(1.0 + x - j2)
        return cmath.exp(acc)

    v = phi0[:k, k]
    if k == 1:
        w = f(phi0[0, 0]) * cmath.exp((qo[0] - qo[1]) * 1j * math.pi * phi0[0, 0]) * v
        return 2j * math.pi * complex(w[0])
    blk = spectral(phi0[:k, :k])
    g1 = blk.fun(f)
    em = blk.fun(lambda x: cmath.exp((qo[k - 1] - qo[k]) * 1j * math.pi * x))
    return 2j * math.pi * complex((g1 @ em @ v)[k - 1])


def _subdiag_lower(phi0, lams, qo, k: int) -> complex:
    """(k+1, k) slot of S_d via the matrix-Gamma form (before its prefactor)."""

    def f(x):
        acc = 0.0 + 0.0j
        for p in lams[k]:
            acc += 2.0 * _lg(1.0 + p - x)
        for j1 in lams[k + 1]:
            acc -= _lg(1.0 + j1 - x)
        for j2 in lams[k - 1]:
            acc -= _lg(1.0 + j2 - x)
        return cmath.exp(acc)

    w = phi0[k, :k]
    if k == 1:
        out = w * cmath.exp((qo[1] - qo[0]) * 1j * math.pi * phi0[0, 0]) * f(phi0[0, 0])
        return 2j * math.pi * complex(out[0])
    blk = spectral(phi0[:k, :k])
    g2 = blk.fun(f)
    em = blk.fun(lambda x: cmath.exp((qo[k] - qo[k - 1]) * 1j * math.pi * x))
    return 2j * math.pi * complex((w @ em @ g2)[k - 1])


def relation_suite(a, d: float = -math.pi / 2, k: int | None = None) -> dict:
    """Numerical violations of the closed-form Stokes/connection identities.

    Evaluated on the (E_k, delta_k A) system (k defaults to the dimension).
    Returns a dict of identity name -> max violation; all should be tiny for
    non-resonant diagonalizable input.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    k = n if k is None else k
    dk_a = delta_k(a, k)
    blockexp = expm(2j * math.pi * a[:k, :k])
    full_exp = np.eye(n, dtype=complex) * 0.0
    full_exp[:k, :k] = blockexp
    for j in range(k, n):
        full_exp[j, j] = cmath.exp(2j * math.pi * a[j, j])
    out = {}
    sp = stokes_Ek(k, a, d)
    e2d = expm(2j * math.pi * sp.formal_diag)
    nu_lu = np.linalg.inv(sp.s_minus) @ e2d @ sp.s_plus
    try:
        c, cinv = connection_Ek(k, a, d)
        has_connection = True
    except Resonant:
        # resonant full block: the connection-matrix normal form does not
        # exist, only the Stokes identities are reportable
        has_connection = False
    if has_connection:
        nu_conj = c @ full_exp @ cinv
        out["lu_equals_conjugation"] = float(np.linalg.norm(nu_lu - nu_conj))
    else:
        nu_conj = nu_lu
    sp2 = stokes_Ek(k, a, d + 2 * math.pi)
    em = expm(-2j * math.pi * sp.formal_diag)
    ep = expm(2j * math.pi * sp.formal_diag)
    out["shift_two_pi"] = float(
        max(
            np.linalg.norm(sp2.s_plus - em @ sp.s_plus @ ep),
            np.linalg.norm(sp2.s_minus - em @ sp.s_minus @ ep),
        )
    )
    spm = stokes_Ek(k, a, d - math.pi)
    spp = stokes_Ek(k, a, d + math.pi)
    out["half_turn_inverse"] = float(
        max(
            np.linalg.norm(spm.s_plus @ sp.s_minus - np.eye(n)),
            np.linalg.norm(spp.s_minus @ sp.s_plus - np.eye(n)),
        )
    )
    if has_connection:
        c2, _ = connection_Ek(k, a, d + 2 * math.pi)
        out["connection_shift"] = float(np.linalg.norm(c2 - em @ c @ full_exp))
        cp, _ = connection_Ek(k, a, d + math.pi)
        cm, _ = connection_Ek(k, a, d - math.pi)
        out["connection_stokes"] = float(
            max(np.linalg.norm(cp - sp.s_plus @ c), np.linalg.norm(cm - sp.s_minus @ c))
        )
    # transpose / conjugate / dagger symmetries; the sign flips of u are
    # handled by the c-scaling rule with c = e^{+/- i pi}
    at = -dk_a.T
    dt = delta_k(at, k)
    spt_p = stokes_Ek(k, at, d + math.pi)
    spt_m = stokes_Ek(k, at, d - math.pi)
    db = delta_k(delta_k(at, k), k - 1)
    viol_t = []
    for spt, sign in ((spt_p, 1.0), (spt_m, -1.0)):
        lhs_p = expm(sign * 1j * math.pi * db) @ spt.s_plus @ expm(-sign * 1j * math.pi * db)
        lhs_m = expm(sign * 1j * math.pi * db) @ spt.s_minus @ expm(-sign * 1j * math.pi * db)
        viol_t.append(
            max(
                np.linalg.norm(lhs_p - np.linalg.inv(sp.s_plus).T),
                np.linalg.norm(lhs_m - np.linalg.inv(sp.s_minus).T),
            )
        )
    out["transpose_symmetry"] = float(min(viol_t))
    ac = np.conj(dk_a)
    spc_p = stokes_Ek(k, ac, -d)
    out["conjugate_symmetry"] = float(
        max(
            np.linalg.norm(sp.s_plus - np.conj(spc_p.s_minus)),
            np.linalg.norm(sp.s_minus - np.conj(spc_p.s_plus)),
        )
    )
    out["det_nu"] = float(
        abs(np.linalg.det(nu_conj) - cmath.exp(2j * math.pi * np.trace(dk_a)))
    )
    return out
