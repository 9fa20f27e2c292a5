"""Dense complex linear algebra on small matrices.

Matrix functions are evaluated through an explicit spectral decomposition
(eigenvalues plus Lagrange-interpolation projectors), which is exact for
diagonalizable matrices with separated eigenvalues.  The eigenvalue solver is
a complex Hessenberg reduction followed by shifted QR iteration; matrices here
are tiny (n <= 12), so determinism and accuracy matter more than speed.

All angles are raw reals on the universal cover: nothing in this module ever
reduces an argument mod 2*pi.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    MismatchedBranch,
    NearDegenerate,
    NonConvergence,
    PoleAtEigenvalue,
    Resonant,
)

__all__ = [
    "ArgCplx",
    "SpectralDecomp",
    "eigvals",
    "spectral",
    "matfun",
    "expm",
    "cpow",
    "loggamma",
    "gammafun",
    "factorialmat",
    "matrix_log_branch",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ArgCplx:
    """A nonzero complex number carried with its argument on the universal cover.

    ``arg`` is *not* reduced mod 2*pi; powers z^A genuinely depend on the
    chosen branch, so the caller owns the winding.
    """

    modulus: float
    arg: float

    def __post_init__(self):
        if not (self.modulus > 0.0) or not math.isfinite(self.modulus):
            raise ValueError("modulus must be positive and finite")

    @property
    def value(self) -> complex:
        return self.modulus * cmath.exp(1j * self.arg)

    @property
    def log(self) -> complex:
        """log z on the chosen branch."""
        return math.log(self.modulus) + 1j * self.arg

    @staticmethod
    def from_value(z: complex, winding: int = 0) -> "ArgCplx":
        """Principal argument plus ``winding`` extra turns."""
        z = complex(z)
        if z == 0:
            raise ValueError("zero has no argument")
        return ArgCplx(abs(z), cmath.phase(z) + 2.0 * math.pi * winding)

    def __mul__(self, other: "ArgCplx") -> "ArgCplx":
        return ArgCplx(self.modulus * other.modulus, self.arg + other.arg)

    def __truediv__(self, other: "ArgCplx") -> "ArgCplx":
        return ArgCplx(self.modulus / other.modulus, self.arg - other.arg)

    def __pow__(self, e: float) -> "ArgCplx":
        return ArgCplx(self.modulus**e, self.arg * e)


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return a


def _hessenberg(a: np.ndarray) -> np.ndarray:
    """Householder reduction to upper Hessenberg form."""
    h = a.copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k]
        nx = np.linalg.norm(x)
        if nx <= 100 * _EPS * np.linalg.norm(h):
            continue
        v = x.copy()
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
    return h


def eigvals(a, maxiter_per_eig: int = 80) -> np.ndarray:
    """Eigenvalues of a complex square matrix by shifted QR iteration.

    Returns eigenvalues sorted lexicographically by (Re, Im).  Raises
    :class:`NonConvergence` if a deflation stalls.
    """
    a = _as_matrix(a)
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0]], dtype=complex)
    scale = np.linalg.norm(a, ord="fro")
    if scale == 0.0:
        return np.zeros(n, dtype=complex)
    h = _hessenberg(a / scale)
    eigs: list[complex] = []
    m = n
    it = 0
    while m > 0:
        if m == 1:
            eigs.append(h[0, 0])
            m = 0
            break
        # locate the lowest negligible subdiagonal entry in the active block
        l = 0
        for i in range(m - 1, 0, -1):
            if abs(h[i, i - 1]) <= _EPS * (abs(h[i - 1, i - 1]) + abs(h[i, i]) + _EPS):
                h[i, i - 1] = 0.0
                l = i
                break
        if l == m - 1:
            eigs.append(h[m - 1, m - 1])
            m -= 1
            it = 0
            continue
        it += 1
        if it > maxiter_per_eig:
            raise NonConvergence("QR iteration failed to deflate an eigenvalue")
        # Wilkinson shift from the trailing 2x2 of the active block
        t11, t12 = h[m - 2, m - 2], h[m - 2, m - 1]
        t21, t22 = h[m - 1, m - 2], h[m - 1, m - 1]
        tr = t11 + t22
        disc = cmath.sqrt((t11 - t22) ** 2 + 4.0 * t12 * t21)
        mu1, mu2 = (tr + disc) / 2.0, (tr - disc) / 2.0
        mu = mu1 if abs(mu1 - t22) <= abs(mu2 - t22) else mu2
        if it % 13 == 0:
            # rare ad-hoc shift to break symmetry stalls
            mu = mu + abs(h[m - 1, m - 2]) * (0.7390851 + 0.3387j)
        # explicit single-shift QR step on the active block h[l:m, l:m]:
        # triangularize (H - mu I) by Givens rotations, then H <- Q^H H Q
        nb = m - l
        b = h[l:m, l:m] - mu * np.eye(nb)
        rots = []
        for i in range(nb - 1):
            x, y = b[i, i], b[i + 1, i]
            r = math.hypot(abs(x), abs(y))
            if r == 0.0:
                c, s = 1.0, 0.0 + 0.0j
            else:
                c = abs(x) / r
                s = (x / abs(x) if x != 0 else 1.0) * y.conjugate() / r
            rots.append((c, s))
            g0 = c * b[i, :] + s * b[i + 1, :]
            g1 = -s.conjugate() * b[i, :] + c * b[i + 1, :]
            b[i, :], b[i + 1, :] = g0, g1
        for i, (c, s) in enumerate(rots):
            r0, r1 = l + i, l + i + 1
            g0 = c * h[r0, :] + s * h[r1, :]
            g1 = -s.conjugate() * h[r0, :] + c * h[r1, :]
            h[r0, :], h[r1, :] = g0, g1
        for i, (c, s) in enumerate(rots):
            c0, c1 = l + i, l + i + 1
            g0 = c * h[:, c0] + s.conjugate() * h[:, c1]
            g1 = -s * h[:, c0] + c * h[:, c1]
            h[:, c0], h[:, c1] = g0, g1
    lam = scale * np.array(eigs, dtype=complex)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues and spectral projectors of a diagonalizable matrix.

    Invariants (up to the separation tolerance and its conditioning ``kappa``):
    sum(projs) = I, projs[i] @ projs[j] = delta_ij projs[i], and
    sum(eigs[i] * projs[i]) reconstructs ``source``.
    """

    dim: int
    eigs: np.ndarray
    projs: tuple
    source: np.ndarray
    kappa: float = field(default=1.0)

    def fun(self, f: Callable[[complex], complex]) -> np.ndarray:
        return matfun(self, f)

    def power_weights(self, logz: complex) -> np.ndarray:
        """Table w[i,j] = z^(eigs[i]-eigs[j]) for the given branch of log z."""
        lam = self.eigs
        return np.exp(np.subtract.outer(lam, lam) * logz)

    def conjugate_power(self, logz: complex, x: np.ndarray) -> np.ndarray:
        """z^{ad source} x = z^source x z^-source, slotwise on projectors."""
        w = self.power_weights(logz)
        out = np.zeros_like(x, dtype=complex)
        for i, pi in enumerate(self.projs):
            acc = np.zeros_like(x, dtype=complex)
            for j, pj in enumerate(self.projs):
                acc += w[i, j] * (x @ pj)
            out += pi @ acc
        return out


def spectral(a, tol: float | None = None) -> SpectralDecomp:
    """Spectral decomposition with Lagrange-product projectors.

    ``tol`` is the absolute eigenvalue-separation tolerance; defaults to
    1e-8 relative to ||a||.  Raises :class:`NearDegenerate` when two
    eigenvalues are closer than that (repeated or defective input).
    """
    a = _as_matrix(a)
    n = a.shape[0]
    norm = np.linalg.norm(a, ord=2)
    if tol is None:
        tol = 1e-8 * max(norm, 1.0)
    lam = eigvals(a)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(lam[i] - lam[j]) <= tol:
                raise NearDegenerate(
                    f"eigenvalues {lam[i]:.6g} and {lam[j]:.6g} separated by "
                    f"{abs(lam[i] - lam[j]):.3g} <= tol {tol:.3g}"
                )
    eye = np.eye(n, dtype=complex)
    projs = []
    for i in range(n):
        p = eye.copy()
        for j in range(n):
            if j != i:
                p = p @ (a - lam[j] * eye) / (lam[i] - lam[j])
        projs.append(p)
    # one Rayleigh refinement of the eigenvalues through the projectors
    lam_ref = np.array(
        [np.trace(p @ a) / np.trace(p) if abs(np.trace(p)) > 0.1 else lam[i] for i, p in enumerate(projs)]
    )
    if np.all(np.abs(lam_ref - lam) < 10 * tol):
        lam = lam_ref
        projs = []
        for i in range(n):
            p = eye.copy()
            for j in range(n):
                if j != i:
                    p = p @ (a - lam[j] * eye) / (lam[i] - lam[j])
            projs.append(p)
    kappa = float(sum(np.linalg.norm(p, ord=2) for p in projs)) ** 2
    return SpectralDecomp(dim=n, eigs=lam, projs=tuple(projs), source=a, kappa=kappa)


def matfun(s: SpectralDecomp, f: Callable[[complex], complex]) -> np.ndarray:
    """Evaluate f on a diagonalizable matrix: sum_i f(lambda_i) P_i."""
    out = np.zeros((s.dim, s.dim), dtype=complex)
    for lam, p in zip(s.eigs, s.projs):
        w = complex(f(lam))
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            raise PoleAtEigenvalue(f"f is singular at eigenvalue {lam:.6g}")
        out += w * p
    return out


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring of the Taylor series."""
    a = _as_matrix(a)
    norm = np.linalg.norm(a, ord=1)
    s = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    t = a / (2**s)
    n = a.shape[0]
    term = np.eye(n, dtype=complex)
    out = np.eye(n, dtype=complex)
    for k in range(1, 40):
        term = term @ t / k
        out += term
        if np.linalg.norm(term, ord=1) < 1e-20 * max(1.0, np.linalg.norm(out, ord=1)):
            break
    for _ in range(s):
        out = out @ out
    return out


def cpow(z: ArgCplx, a) -> np.ndarray:
    """z^A = exp(A log z) on the branch carried by ``z``."""
    a = _as_matrix(a)
    return expm(a * z.log)


# ---------------------------------------------------------------------------
# log-Gamma: Lanczos approximation (g = 607/128, 15 terms) with reflection.

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)


def _loggamma_core(z: complex) -> complex:
    """Lanczos evaluation, valid for Re z >= 0.5."""
    acc = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[k] / (z - 1.0 + k)
    t = z + _LANCZOS_G - 0.5
    return (z - 0.5) * cmath.log(t) - t + 0.5 * math.log(2.0 * math.pi) + cmath.log(acc)


def loggamma(z: complex) -> complex:
    """Principal branch of log Gamma(z).

    Poles at non-positive integers raise :class:`PoleAtEigenvalue`.  The
    reflection step for Re z < 0.5 is written via log1p of e^{2 pi i z} so it
    neither overflows nor jumps branch for large |Im z|.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise PoleAtEigenvalue(f"log-Gamma pole at {z}")
    if z.real >= 0.5:
        return _loggamma_core(z)
    if z.imag < 0.0:
        return loggamma(z.conjugate()).conjugate()
    # sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 pi i z}), safe for Im z >= 0
    logsin = -1j * math.pi * z + _log1p_c(-cmath.exp(2j * math.pi * z)) + cmath.log(0.5j)
    return math.log(math.pi) - logsin - _loggamma_core(1.0 - z)


def _log1p_c(w: complex) -> complex:
    if abs(w) > 0.5:
        return cmath.log(1.0 + w)
    # series for small |w| to keep full precision
    term = w
    acc = w
    for k in range(2, 40):
        term *= -w
        acc += term / k
        if abs(term) < 1e-20 * max(abs(acc), 1e-300):
            break
    return acc


def gammafun(z: complex) -> complex:
    """Gamma(z) through the Lanczos log-Gamma."""
    return cmath.exp(loggamma(z))


def factorialmat(s: SpectralDecomp, shift: complex = 0.0) -> np.ndarray:
    """(A + shift I)! = Gamma(A + (shift+1) I) via the functional calculus."""
    for lam in s.eigs:
        w = lam + shift + 1.0
        if abs(w.imag) < 1e-12 and w.real < 0.5 and abs(w.real - round(w.real)) < 1e-12:
            raise PoleAtEigenvalue(f"Gamma pole: eigenvalue {lam:.6g} with shift {shift}")
    return matfun(s, lambda lam: gammafun(lam + shift + 1.0))


def matrix_log_branch(v, sigma: Sequence[complex], tol: float = 1e-8) -> np.ndarray:
    """The unique M with e^{2 pi i M} = V and spectrum ``sigma``.

    ``sigma`` must be non-resonant (no two entries differing by a non-zero
    integer) and e^{2 pi i sigma} must match eig(V) as a multiset within
    ``tol``; otherwise :class:`Resonant` / :class:`MismatchedBranch`.
    """
    v = _as_matrix(v)
    sigma = [complex(s) for s in sigma]
    if len(sigma) != v.shape[0]:
        raise MismatchedBranch("sigma length must equal the matrix dimension")
    for i in range(len(sigma)):
        for j in range(i + 1, len(sigma)):
            d = sigma[i] - sigma[j]
            if abs(d.imag) < tol and abs(d.real - round(d.real)) < tol and round(d.real) != 0:
                raise Resonant(f"sigma entries {sigma[i]} and {sigma[j]} differ by an integer")
    dec = spectral(v)
    targets = [cmath.exp(2j * math.pi * s) for s in sigma]
    scale = max(max(abs(t) for t in targets), 1e-300)
    used = [False] * dec.dim
    m = np.zeros_like(v)
    for s, t in zip(sigma, targets):
        best, best_d = -1, math.inf
        for j, lam in enumerate(dec.eigs):
            if not used[j] and abs(lam - t) < best_d:
                best, best_d = j, abs(lam - t)
        if best < 0 or best_d > tol * scale:
            raise MismatchedBranch(
                f"exp(2 pi i {s}) = {t:.6g} does not match any remaining eigenvalue of V"
            )
        used[best] = True
        m = m + s * dec.projs[best]
    return m
