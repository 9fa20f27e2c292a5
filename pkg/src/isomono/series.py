"""Shrinking-solution series: construction, storage and evaluation.

A solution of the full equation is assembled level by level,
Phi_0 -> Phi_1(z_1) -> ... -> Phi_n(z_1..z_n).  Each level k is a series
in z_k^{-1} whose coefficients live in a finite space of complex powers
z_k^d; the recursion alternates an algebraic convolution step with a
resolvent step that realizes the definite integral from infinity.

Everything here works in the conjugated variables
A_m = z_k^{ad delta Phi} phi_{k,m}, which is where the coefficients are
finite sums of powers; the stored pair per order m is (B_m, A_m) with
B_m = delta_{k-1} phi_{k,m}.

Only the diagonalizable case is supported: log-power terms never appear and
are rejected.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cmatrix import ArgCplx, SpectralDecomp, eigvals, spectral
from .errors import (
    BoundaryViolated,
    NearDegenerate,
    OutsideRadius,
    SmallDenominator,
    TruncationInsufficient,
)
from .operators import U_k, ZPoint, delta_k, offdiag_block

__all__ = [
    "LogPowerSum",
    "SeriesLevel",
    "ShrinkingSolution",
    "spectral_grouped",
    "check_boundary",
    "resolvent_integrate",
    "step_sk",
    "sub_leading",
    "radius_bound",
    "boundary_of",
]

MERGE_TOL = 1e-9


def _key(d: complex) -> tuple[int, int]:
    return (round(d.real / MERGE_TOL), round(d.imag / MERGE_TOL))


class LogPowerSum:
    """Finite sum of terms X * z^d (the log-power degree is always zero here).

    Terms with exponents closer than the merge tolerance are combined; the
    representation is canonical up to that quantization.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int):
        self.n = n
        self.terms: dict[tuple[int, int], list] = {}

    @staticmethod
    def constant(x: np.ndarray) -> "LogPowerSum":
        s = LogPowerSum(x.shape[0])
        s.add(0.0 + 0.0j, x)
        return s

    def add(self, d: complex, x: np.ndarray):
        k = _key(d)
        slot = self.terms.get(k)
        if slot is None:
            self.terms[k] = [complex(d), np.array(x, dtype=complex)]
        else:
            slot[1] = slot[1] + x

    def items(self):
        return ((d, x) for d, x in self.terms.values())

    def compress(self, floor: float = 0.0) -> "LogPowerSum":
        """Drop terms with norm below ``floor``."""
        out = LogPowerSum(self.n)
        for d, x in self.items():
            if np.max(np.abs(x)) > floor:
                out.add(d, x)
        return out

    def __add__(self, other: "LogPowerSum") -> "LogPowerSum":
        out = LogPowerSum(self.n)
        for d, x in self.items():
            out.add(d, x)
        for d, x in other.items():
            out.add(d, x)
        return out

    def __sub__(self, other: "LogPowerSum") -> "LogPowerSum":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "LogPowerSum":
        out = LogPowerSum(self.n)
        for d, x in self.items():
            out.add(d, c * x)
        return out

    def map(self, f) -> "LogPowerSum":
        """Apply a linear matrix map termwise (projections, ad with constants)."""
        out = LogPowerSum(self.n)
        for d, x in self.items():
            out.add(d, f(x))
        return out

    def mul(self, other: "LogPowerSum") -> "LogPowerSum":
        out = LogPowerSum(self.n)
        for d1, x1 in self.items():
            for d2, x2 in other.items():
                out.add(d1 + d2, x1 @ x2)
        return out

    def commutator(self, other: "LogPowerSum") -> "LogPowerSum":
        return self.mul(other) - other.mul(self)

    def anticommutator(self, other: "LogPowerSum") -> "LogPowerSum":
        return self.mul(other) + other.mul(self)

    def conj_ad(self, dec: SpectralDecomp, sign: float = 1.0) -> "LogPowerSum":
        """z^{sign * ad A} applied to the sum, A given by its decomposition."""
        out = LogPowerSum(self.n)
        lam = dec.eigs
        for d, x in self.items():
            scale = np.max(np.abs(x))
            for i, pi in enumerate(dec.projs):
                for j, pj in enumerate(dec.projs):
                    y = pi @ x @ pj
                    if np.max(np.abs(y)) <= 1e-16 * scale:
                        continue
                    out.add(d + sign * (lam[i] - lam[j]), y)
        return out

    def norm(self) -> float:
        return sum(np.linalg.norm(x, ord=2) for _, x in self.items())

    def evaluate(self, logz: complex) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=complex)
        for d, x in self.items():
            out += x * cmath.exp(d * logz)
        return out

    def max_re_exponent(self) -> float:
        return max((d.real for d, _ in self.items()), default=-math.inf)


def spectral_grouped(a, tol: float | None = None) -> SpectralDecomp:
    """Spectral data that tolerates repeated eigenvalues of diagonal matrices.

    Diagonal input (the constant and rational fixtures) is grouped exactly
    into indicator projectors; anything else goes through the strict
    separated-eigenvalue decomposition.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    norm = np.linalg.norm(a, ord=2)
    if tol is None:
        tol = 1e-8 * max(norm, 1.0)
    off = a - np.diag(np.diag(a))
    if np.linalg.norm(off, ord=2) <= 1e-13 * max(norm, 1.0):
        d = np.diag(a)
        groups: list[list[int]] = []
        reps: list[complex] = []
        for i, lam in enumerate(d):
            for g, r in zip(groups, reps):
                if abs(lam - r) <= tol:
                    g.append(i)
                    break
            else:
                groups.append([i])
                reps.append(lam)
        eigs, projs = [], []
        for g in groups:
            p = np.zeros((n, n), dtype=complex)
            for i in g:
                p[i, i] = 1.0
            eigs.append(complex(np.mean([d[i] for i in g])))
            projs.append(p)
        kappa = float(len(groups)) ** 2
        return SpectralDecomp(dim=n, eigs=np.array(eigs), projs=tuple(projs), source=a, kappa=kappa)
    return spectral(a, tol)


def check_boundary(phi0: np.ndarray, eps: float) -> tuple[bool, list[float]]:
    """Eigenvalue-gap condition on the leading k x k blocks, k = 1..n-1.

    Returns (ok, gaps) where gaps[k-1] is the largest |Re| eigenvalue gap of
    the k-th block; ok means every gap < 1 - eps.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    n = phi0.shape[0]
    gaps = []
    for k in range(1, n):
        lam = eigvals(phi0[:k, :k])
        g = 0.0
        for i in range(k):
            for j in range(k):
                g = max(g, abs((lam[i] - lam[j]).real))
        gaps.append(g)
    return all(g < 1.0 - eps for g in gaps), gaps


def resolvent_integrate(
    s: LogPowerSum,
    mu: complex,
    dec: SpectralDecomp | None,
    tol: float = 1e-8,
) -> LogPowerSum:
    """Algebraic realization of z^{mu+adA} int_inf^z z^{-(mu+adA)} ( . ) dz/z.

    Acting on a term X z^d this is (d - mu - ad A)^{-1} X z^d; on projector
    slots the denominator is d - mu - (lambda_i - lambda_j), and in the scalar
    case (dec None) just d - mu.  A denominator below ``tol`` with a
    non-negligible numerator raises :class:`SmallDenominator`.
    """
    out = LogPowerSum(s.n)
    scale = max((np.max(np.abs(x)) for _, x in s.items()), default=0.0)
    if scale == 0.0:
        return out
    for d, x in s.items():
        if dec is None:
            den = d - mu
            if abs(den) <= tol:
                raise SmallDenominator(f"denominator {den:.3g} at exponent {d:.6g}")
            out.add(d, x / den)
            continue
        lam = dec.eigs
        for i, pi in enumerate(dec.projs):
            for j, pj in enumerate(dec.projs):
                y = pi @ x @ pj
                if np.max(np.abs(y)) <= 1e-15 * scale:
                    continue
                den = d - mu - (lam[i] - lam[j])
                if abs(den) <= tol:
                    raise SmallDenominator(
                        f"denominator {den:.3g} at exponent {d:.6g}, slot ({i},{j})"
                    )
                out.add(d, y / den)
    return out


@dataclass
class SeriesLevel:
    """Truncated series data of one step Phi_{k-1} -> Phi_k at a fixed prefix.

    ``coeffs[m]`` holds (B_m, A_m); A_m is the conjugated coefficient that
    enters evaluation, B_m the leading-block part.  The recursion state kept
    alongside (conjugated coefficients and powers of U_(k)) makes the level
    extendable in place.
    """

    k: int
    base: np.ndarray
    dec: SpectralDecomp
    Ukmat: np.ndarray
    eps: float
    coeffs: list = field(default_factory=list)
    radius: float = math.inf
    small_tol: float = 1e-8
    _ahat: list = field(default_factory=list)
    _bhat_cache: list = field(default_factory=list)
    _zadU: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def _zad_upower(self, p: int) -> LogPowerSum:
        got = self._zadU.get(p)
        if got is None:
            got = LogPowerSum.constant(np.linalg.matrix_power(self.Ukmat, p)).conj_ad(self.dec)
            self._zadU[p] = got
        return got

    def extend(self, target_order: int):
        """Grow the coefficient table up to the requested order."""
        n = self.base.shape[0]
        k = self.k
        floor = 1e-300
        while self.order < target_order:
            m1 = self.order + 1  # producing coefficient m+1
            dproj = [a.map(lambda x: offdiag_block(x, k)) for a in self._ahat]
            bhat = LogPowerSum(n)
            ahat = LogPowerSum(n)
            for p in range(1, m1 + 1):
                zu = self._zad_upower(p)
                sgn = -1.0 if p % 2 else 1.0
                conv = LogPowerSum(n)
                for i in range(0, m1 - p + 1):
                    j = m1 - p - i
                    conv = conv + dproj[i].mul(dproj[j])
                bhat = bhat + zu.commutator(conv).scale(sgn)
                for i in range(0, m1 - p + 1):
                    j = m1 - p - i
                    w = zu.anticommutator(dproj[i])
                    ahat = ahat + w.commutator(self._ahat[j]).scale(sgn)
            b_next = resolvent_integrate(bhat.compress(floor), m1, self.dec, self.small_tol)
            # first sum of the a-recursion: [A_i, Bhat_j] over i + j = m+1, j >= 1
            for i in range(0, m1):
                j = m1 - i
                bj = b_next if j == m1 else self._bhat_cache[j]
                ahat = ahat + self._ahat[i].commutator(bj)
            a_next = resolvent_integrate(ahat.compress(floor), m1, None, self.small_tol)
            self._bhat_cache.append(b_next)
            self._ahat.append(a_next)
            self.coeffs.append((b_next.conj_ad(self.dec, -1.0), a_next))

    def evaluate(self, zk: ArgCplx, tol: float = 1e-9, max_order: int = 40) -> np.ndarray:
        """Sum the series at z_k and undo the conjugation.

        Extends the coefficient table on demand until the tail estimate drops
        below ``tol`` relative to the accumulated value.
        """
        logz = zk.log
        acc = np.zeros_like(self.base)
        norms = []
        m = 0
        while True:
            if m > self.order:
                if m > max_order:
                    raise TruncationInsufficient(
                        f"tail above tolerance after {max_order} orders at |z|={zk.modulus:.3g}"
                    )
                self.extend(m)
            term = self.coeffs[m][1].evaluate(logz) * cmath.exp(-m * logz)
            acc = acc + term
            norms.append(np.linalg.norm(term, ord=2))
            scale = max(np.linalg.norm(acc, ord=2), 1e-300)
            if m >= 2:
                rho = norms[-1] / max(norms[-2], 1e-300)
                if rho < 1.0 and norms[-1] * rho / (1.0 - rho) <= tol * scale:
                    break
                if norms[-1] <= 1e-18 * scale and norms[-2] <= 1e-18 * scale:
                    break
            m += 1
        return self.dec.conjugate_power(-logz, acc)


def _block_gap(phi: np.ndarray, k: int) -> float:
    """Largest |Re| eigenvalue gap of the upper-left k x k block (0 if k < 2)."""
    if k < 2:
        return 0.0
    lam = eigvals(phi[:k, :k])
    g = 0.0
    for i in range(k):
        for j in range(k):
            g = max(g, abs((lam[i] - lam[j]).real))
    return g


def step_sk(
    phi_prev: np.ndarray,
    zprefix,
    n: int,
    k: int,
    M: int = 3,
    eps: float = 0.1,
    small_tol: float = 1e-8,
) -> SeriesLevel:
    """Build the level-k series on top of a numeric Phi_{k-1}.

    ``zprefix`` is the tuple of ArgCplx coordinates z_1..z_{k-1} (only
    z_3..z_{k-1} enter, through U_(k)).  Raises BoundaryViolated when the
    (k-1)-block eigenvalue gaps are not < 1 - eps.
    """
    phi_prev = np.asarray(phi_prev, dtype=complex)
    gap = _block_gap(phi_prev, k - 1)
    if gap >= 1.0 - eps:
        raise BoundaryViolated(f"block {k-1} gap {gap:.4f} >= {1.0 - eps:.4f}")
    dphi = delta_k(phi_prev, k - 1)
    dec = spectral_grouped(dphi)
    zfull = list(zprefix) + [ArgCplx(1.0, 0.0)] * (n - len(zprefix))
    ukmat = U_k(ZPoint(n, tuple(zfull)), k)
    level = SeriesLevel(k=k, base=phi_prev, dec=dec, Ukmat=ukmat, eps=eps, small_tol=small_tol)
    a0 = LogPowerSum.constant(phi_prev)
    b0 = LogPowerSum.constant(dphi)
    level._ahat = [a0]
    level._bhat_cache = [b0.conj_ad(dec)]
    level.coeffs = [(b0, a0)]
    level.extend(M)
    if np.linalg.norm(offdiag_block(phi_prev, k)) == 0.0:
        # the recursion is identically zero beyond order 0: converges everywhere
        level.radius = 0.0
    else:
        level.radius = radius_bound(level, eps)
    return level


def radius_bound(level: SeriesLevel, eps: float, M_const: float = 2.0) -> float:
    """Guaranteed absolute-convergence radius for the level (nilpotency 1).

    The estimate uses the projector-norm constant of the conjugating
    decomposition and is conservative; evaluation beyond it is always safe.
    """
    if M_const <= 1.0:
        raise ValueError("M_const must exceed 1")
    n = level.base.shape[0]
    k = level.k
    # projector-norm constant: block projectors plus one unit norm per
    # trailing diagonal slot
    if k >= 2:
        block = spectral_grouped(delta_k(level.base, k - 1)[: k - 1, : k - 1])
        psum = sum(np.linalg.norm(p, ord=2) for p in block.projs)
    else:
        psum = 0.0
    r_const = (psum + (n - k + 1)) ** 2
    phin = np.linalg.norm(level.base, ord=2)
    unorm = np.linalg.norm(level.Ukmat, ord=2)
    if phin == 0.0 or unorm == 0.0:
        return M_const ** (1.0 / eps)
    val = 2.0 * unorm * (1.0 + (2.0 * r_const * phin / eps) ** 2) * (1.0 + 1.0 / (r_const * phin))
    return max(val, M_const) ** (1.0 / eps)


def sub_leading(phi_prev: np.ndarray, zprefix, n: int, k: int) -> tuple[LogPowerSum, LogPowerSum]:
    """Closed form of the order-1 coefficients (B_1, A_1).

    Independent of the recursion; used as its cross-check.
    """
    phi_prev = np.asarray(phi_prev, dtype=complex)
    dec = spectral_grouped(delta_k(phi_prev, k - 1))
    zfull = list(zprefix) + [ArgCplx(1.0, 0.0)] * (n - len(zprefix))
    u = U_k(ZPoint(n, tuple(zfull)), k)
    g = offdiag_block(phi_prev, k)
    g2 = g @ g
    lam = dec.eigs
    # w = (1 + ad dPhi)^{-1} g^2, constant
    w = np.zeros_like(g2)
    for i, pi in enumerate(dec.projs):
        for j, pj in enumerate(dec.projs):
            w += pi @ g2 @ pj / (1.0 + lam[i] - lam[j])
    # B_1 = [U, z^{-ad} w / (as one operator)]: exponents -(lam_i - lam_j)
    wsum = LogPowerSum(n)
    for i, pi in enumerate(dec.projs):
        for j, pj in enumerate(dec.projs):
            y = pi @ g2 @ pj / (1.0 + lam[i] - lam[j])
            if np.max(np.abs(y)) > 0.0:
                wsum.add(-(lam[i] - lam[j]), y)
    b1 = wsum.map(lambda x: u @ x) - wsum.map(lambda x: x @ u)
    # v = (z^{ad}/(-1 + ad)) U as a power sum
    v = LogPowerSum(n)
    for i, pi in enumerate(dec.projs):
        for j, pj in enumerate(dec.projs):
            den = -1.0 + lam[i] - lam[j]
            y = pi @ u @ pj / den
            if np.max(np.abs(y)) > 0.0:
                v.add(lam[i] - lam[j], y)
    phi_c = LogPowerSum.constant(phi_prev)
    w_c = LogPowerSum.constant(w)
    g_c = LogPowerSum.constant(g)
    a1 = phi_c.commutator(v.commutator(w_c)) - v.anticommutator(g_c).commutator(phi_c)
    return b1, a1


@dataclass
class ShrinkingSolution:
    """A boundary value plus the lazily built tower of series levels.

    Levels are keyed by the numeric z-prefix; evaluation walks k = 1..n,
    feeding each level's value into the next.  Levels k >= 3 refuse points
    inside their guaranteed radius.
    """

    n: int
    phi0: np.ndarray
    eps: float = 0.1
    M: int = 20
    tol: float = 1e-9
    _cache: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi0 = np.asarray(self.phi0, dtype=complex)
        ok, gaps = check_boundary(self.phi0, self.eps)
        if not ok:
            raise BoundaryViolated(f"block gaps {gaps} violate margin eps={self.eps}")

    def _prefix_key(self, zp: ZPoint, k: int):
        return (k,) + tuple((round(z.modulus, 12), round(z.arg, 12)) for z in zp.z[: k - 1])

    def level(self, zp: ZPoint, k: int) -> SeriesLevel:
        """The level-k series above the prefix z_1..z_{k-1} of ``zp``."""
        key = self._prefix_key(zp, k)
        got = self._cache.get(key)
        if got is not None:
            return got
        phi = self.phi0
        for m in range(1, k):
            phi = self.level(zp, m).evaluate(zp.z[m - 1], self.tol)
        lvl = step_sk(phi, zp.z[: k - 1], self.n, k, M=min(self.M, 3), eps=self.eps)
        self._cache[key] = lvl
        return lvl

    def evaluate(self, zp: ZPoint, tol: float | None = None) -> np.ndarray:
        """Value of the solution at a point with |z_k| beyond every radius."""
        tol = self.tol if tol is None else tol
        phi = self.phi0
        for k in range(1, self.n + 1):
            lvl = self.level(zp, k)
            if k >= 3 and zp.z[k - 1].modulus <= lvl.radius:
                raise OutsideRadius(
                    f"|z_{k}| = {zp.z[k-1].modulus:.3g} inside radius {lvl.radius:.3g}"
                )
            phi = lvl.evaluate(zp.z[k - 1], tol, max_order=self.M + 20)
        return phi

    def to_json(self, zp: ZPoint) -> str:
        """Serialize the coefficient tower above ``zp`` (arrays of [re, im])."""
        doc = {"schema": "isomono-series/1", "n": self.n, "eps": self.eps,
               "phi0": _mat_doc(self.phi0), "levels": []}
        for k in range(1, self.n + 1):
            lvl = self.level(zp, k)
            doc["levels"].append(
                {
                    "k": k,
                    "radius": lvl.radius,
                    "base": _mat_doc(lvl.base),
                    "coeffs": [
                        {
                            "m": m,
                            "B": _sum_doc(b),
                            "A": _sum_doc(a),
                        }
                        for m, (b, a) in enumerate(lvl.coeffs)
                    ],
                }
            )
        return json.dumps(doc, indent=1, sort_keys=True)


def _mat_doc(x: np.ndarray) -> dict:
    return {
        "n": int(x.shape[0]),
        "entries": [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(x, dtype=complex)],
    }


def _sum_doc(s: LogPowerSum) -> list:
    out = []
    for d, x in sorted(s.items(), key=lambda t: (t[0].real, t[0].imag)):
        out.append({"d": [float(d.real), float(d.imag)], "X": _mat_doc(x)})
    return out


def boundary_of(sol: ShrinkingSolution, zp: ZPoint, factors=(2.0, 4.0, 8.0)) -> tuple[np.ndarray, list]:
    """Recover the boundary value level by level and report the decay fits.

    For each k the conjugated value at growing |z_k| must approach the level
    base; the report carries the residuals and a fitted decay exponent.  The
    probe points sit at the *empirical* convergence scale of the series (the
    guaranteed radius is far too conservative to see the decay above
    roundoff), growing by ``factors``.
    """
    report = []
    for k in range(1, sol.n + 1):
        lvl = sol.level(zp, k)
        lvl.extend(max(lvl.order, 3))
        zk = zp.z[k - 1]
        a0n = max(lvl.coeffs[0][1].norm(), 1e-300)
        scale = 1.0
        for m in range(1, lvl.order + 1):
            cn = lvl.coeffs[m][1].norm()
            if cn > 0:
                scale = max(scale, (cn / a0n) ** (1.0 / m))
        base_ref = 6.0 * scale
        while True:
            try:
                resid = []
                for f in factors:
                    z = ArgCplx(base_ref * f, zk.arg)
                    val = lvl.evaluate(z, min(1e-6, sol.tol * 1e3))
                    hat = lvl.dec.conjugate_power(z.log, val)
                    resid.append(float(np.linalg.norm(hat - lvl.base, ord=2)))
                break
            except TruncationInsufficient:
                base_ref *= 2.0
        rate = 0.0
        if resid[0] > 0 and resid[-1] > 0:
            rate = -(math.log(resid[-1] / resid[0]) / math.log(factors[-1] / factors[0]))
        report.append({"k": k, "residuals": resid, "decay_exponent": rate})
    return sol.phi0, report
