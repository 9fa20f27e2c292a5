"""Structural operators of the isomonodromy equation.

The leading-block truncation delta_k, the commutator operators ad/da, the
inverse adjoint ad_u^{-1}, the u <-> z coordinate change (with universal-cover
argument bookkeeping) and the diagonal matrices U_(k) that drive the series
recursion.

Conventions: u_0 := 0 and u_{-1} := -1, so z_1 = u_1 and
z_k = (u_k - u_{k-1}) / (u_{k-1} - u_{k-2}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cmatrix import ArgCplx
from .errors import CoincidentU, OnDiagonal

__all__ = [
    "UPoint",
    "ZPoint",
    "delta_k",
    "offdiag_block",
    "ad",
    "da",
    "ad_u_inv",
    "u_from_z",
    "z_from_u",
    "U_k",
    "U_k_from_u",
    "du_dz",
    "rhs_T",
    "rhs_u",
]


@dataclass(frozen=True)
class UPoint:
    """Pole locations u_1..u_n off the fat diagonal, with cover arguments.

    ``diffargs[k-1]`` is arg(u_k - u_{k-1}) on the universal cover (raw real,
    never reduced); it must point in the direction of u_k - u_{k-1}.
    """

    n: int
    u: np.ndarray
    diffargs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=complex))
        object.__setattr__(self, "diffargs", np.asarray(self.diffargs, dtype=float))
        if self.u.shape != (self.n,) or self.diffargs.shape != (self.n,):
            raise ValueError("u and diffargs must have length n")
        _check_off_diagonal(self.u)
        prev = 0.0
        for k in range(self.n):
            d = self.u[k] - (self.u[k - 1] if k > 0 else prev)
            if d == 0:
                raise OnDiagonal(f"u_{k+1} coincides with its predecessor (u_0 = 0)")
            direction = d / abs(d)
            if abs(direction - np.exp(1j * self.diffargs[k])) > 1e-8:
                raise ValueError(f"diffargs[{k}] does not point along u_{k+1} - u_{k}")

    def diag(self) -> np.ndarray:
        return np.diag(self.u)


@dataclass(frozen=True)
class ZPoint:
    """Ratio coordinates z_1..z_n, each nonzero with a cover argument."""

    n: int
    z: tuple

    def __post_init__(self):
        if len(self.z) != self.n:
            raise ValueError("need n coordinates")
        for zk in self.z:
            if not isinstance(zk, ArgCplx):
                raise TypeError("coordinates must be ArgCplx")

    @staticmethod
    def from_values(values, windings=None) -> "ZPoint":
        windings = windings or [0] * len(values)
        return ZPoint(len(values), tuple(ArgCplx.from_value(v, w) for v, w in zip(values, windings)))

    def values(self) -> np.ndarray:
        return np.array([zk.value for zk in self.z], dtype=complex)

    def replace(self, k: int, zk: ArgCplx) -> "ZPoint":
        """New point with the k-th coordinate (1-based) replaced."""
        z = list(self.z)
        z[k - 1] = zk
        return ZPoint(self.n, tuple(z))


def _check_off_diagonal(u: np.ndarray, tol_factor: float = 1e-12):
    n = len(u)
    for i in range(n):
        for j in range(i + 1, n):
            scale = abs(u[i]) + abs(u[j]) + 1.0
            if abs(u[i] - u[j]) <= tol_factor * scale:
                raise OnDiagonal(f"u_{i+1} and u_{j+1} coincide within tolerance")


def delta_k(a: np.ndarray, k: int) -> np.ndarray:
    """Keep the upper-left k x k submatrix and the diagonal, zero the rest."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    out = np.diag(np.diag(a)).astype(complex)
    out[:k, :k] = a[:k, :k]
    return out


def offdiag_block(a: np.ndarray, k: int) -> np.ndarray:
    """(delta_k - delta_{k-1}) a: the off-diagonal k-th row/column inside the k-block."""
    return delta_k(a, k) - delta_k(a, k - 1)


def ad(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if a.shape != x.shape:
        raise ValueError("dimension mismatch")
    return a @ x - x @ a


def da(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if a.shape != x.shape:
        raise ValueError("dimension mismatch")
    return a @ x + x @ a


def ad_u_inv(u, a: np.ndarray, tol_factor: float = 1e-12) -> np.ndarray:
    """Entrywise division by u_i - u_j off the diagonal, zero on it."""
    u = np.asarray(u, dtype=complex)
    a = np.asarray(a, dtype=complex)
    n = len(u)
    out = np.zeros_like(a)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = u[i] - u[j]
            if abs(d) <= tol_factor * (abs(u[i]) + abs(u[j]) + 1.0):
                raise CoincidentU(f"|u_{i+1} - u_{j+1}| below tolerance")
            out[i, j] = a[i, j] / d
    return out


def u_from_z(zp: ZPoint) -> UPoint:
    """u_i = sum_{m <= i} z_1 ... z_m, with accumulated cover arguments."""
    n = zp.n
    prods = []
    acc_val = 1.0 + 0.0j
    acc_arg = 0.0
    for zk in zp.z:
        acc_val *= zk.value
        acc_arg += zk.arg
        prods.append((acc_val, acc_arg))
    u = np.cumsum([p[0] for p in prods])
    diffargs = np.array([p[1] for p in prods])
    _check_off_diagonal(np.asarray(u))
    return UPoint(n, np.asarray(u), diffargs)


def z_from_u(up: UPoint) -> ZPoint:
    """Inverse coordinate change; cover arguments come from diffargs differences."""
    n = up.n
    zs = []
    prev_diff = 1.0 + 0.0j  # u_0 - u_{-1} = 1
    prev_arg = 0.0
    for k in range(n):
        diff = up.u[k] - (up.u[k - 1] if k > 0 else 0.0)
        zs.append(ArgCplx(abs(diff) / abs(prev_diff), up.diffargs[k] - prev_arg))
        prev_diff = diff
        prev_arg = up.diffargs[k]
    return ZPoint(n, tuple(zs))


def _tilde_I(n: int, m: int) -> np.ndarray:
    """diag(1 x m, 0 x (n-m))."""
    d = np.zeros(n)
    d[:m] = 1.0
    return np.diag(d).astype(complex)


def U_k(zp: ZPoint, k: int) -> np.ndarray:
    """The diagonal matrix U_(k), as a finite sum of truncated identities.

    U_(k) = I~_{k-2} + z_{k-1}^{-1} I~_{k-3} + ... + (z_3 ... z_{k-1})^{-1} I~_1,
    the empty sum (k <= 2) being zero.
    """
    n = zp.n
    if not 1 <= k <= n:
        raise ValueError("k out of range")
    out = np.zeros((n, n), dtype=complex)
    coeff = 1.0 + 0.0j
    for m in range(k - 2, 0, -1):
        out += coeff * _tilde_I(n, m)
        coeff /= zp.z[m].value  # next factor is z_{m+1}^{-1} ... indices: z_{m+1} 1-based
    return out


def U_k_from_u(up: UPoint, k: int) -> np.ndarray:
    """U_(k) read off directly from u: diag((u_{k-1}-u_i)/(u_{k-1}-u_{k-2}))."""
    n = up.n
    out = np.zeros((n, n), dtype=complex)
    if k <= 2:
        return out
    u = up.u
    denom = u[k - 2] - u[k - 3] if k >= 3 else 1.0
    for i in range(k - 2):
        out[i, i] = (u[k - 2] - u[i]) / denom if i < k - 3 else 1.0
    # entry k-2 (0-based) is exactly 1 by the formula; the loop above covers i<k-3
    out[k - 3, k - 3] = 1.0 if k >= 3 else out[k - 3, k - 3]
    for i in range(k - 3):
        out[i, i] = (u[k - 2] - u[i]) / denom
    return out


def du_dz(zp: ZPoint, j: int) -> np.ndarray:
    """Diagonal of du/dz_j: entry i is sum_{m=j}^{i} (z_1...z_m)/z_j."""
    n = zp.n
    vals = zp.values()
    prods = np.cumprod(vals)
    out = np.zeros(n, dtype=complex)
    for i in range(j - 1, n):
        out[i] = np.sum(prods[j - 1 : i + 1]) / vals[j - 1]
    return np.diag(out)


def rhs_T(zp: ZPoint, j: int, k: int, phi: np.ndarray) -> np.ndarray:
    """Right side of the (k,n)-equation: [(ad_u^{-1} ad_{du/dz_j} - 1/z_j) delta_k phi, phi]."""
    if not 1 <= j <= k <= zp.n:
        raise ValueError("need 1 <= j <= k <= n")
    up = u_from_z(zp)
    dk = delta_k(phi, k)
    d = du_dz(zp, j)
    w = ad_u_inv(up.u, ad(d, dk)) - dk / zp.z[j - 1].value
    return ad(w, phi)


def rhs_u(u, k: int, phi: np.ndarray) -> np.ndarray:
    """Right side in u-coordinates: [ad_u^{-1} ad_{E_k} phi, phi]."""
    u = np.asarray(u, dtype=complex)
    n = len(u)
    ek = np.zeros((n, n), dtype=complex)
    ek[k - 1, k - 1] = 1.0
    return ad(ad_u_inv(u, ad(ek, phi)), phi)
