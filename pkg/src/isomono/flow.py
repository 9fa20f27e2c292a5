"""Direct numerical integration of the nonlinear isomonodromy flow.

A Dormand-Prince 5(4) pair with PI step control drives everything: the
nonlinear flow in u- or z-coordinates here, and the linear transport in the
oracle module.  Paths are straight segments (or logarithmic rays) in a single
varying coordinate; multi-leg paths are composed by the caller.

Movable poles of the solution show up as step-size underflow and are
reported, never stepped over.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .cmatrix import ArgCplx
from .errors import DiagonalHit, StepUnderflow
from .operators import ZPoint, delta_k, rhs_T, rhs_u, u_from_z, z_from_u

__all__ = [
    "dopri54",
    "Path",
    "Trajectory",
    "integrate_iso",
    "first_integrals",
    "shrink_experiment",
    "estimate_boundary",
    "skew_invariant_check",
    "rows_to_csv",
]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


@dataclass
class StepStats:
    steps: int = 0
    rejected: int = 0
    max_error: float = 0.0


def dopri54(f, s0: float, s1: float, y0: np.ndarray, tol: float,
            record=None, min_step_frac: float = 1e-14, max_steps: int = 2_000_000):
    """Adaptive Dormand-Prince 5(4) on s in [s0, s1] for complex state y.

    ``record(s, y, f(s, y))`` is called at every accepted step (including the
    endpoints).  Raises :class:`StepUnderflow` when the step drops below
    ``min_step_frac`` times the span: for the nonlinear flow that signals a
    movable pole on the path.
    """
    span = s1 - s0
    if span == 0.0:
        if record:
            record(s0, y0, f(s0, y0))
        return y0, StepStats()
    stats = StepStats()
    s, y = s0, np.array(y0, dtype=complex)
    k1 = f(s, y)
    if record:
        record(s, y, k1)
    h = span * 0.01
    prev_err = 1.0
    scale0 = max(np.linalg.norm(y), 1.0)
    while (s1 - s) * math.copysign(1.0, span) > 0:
        if abs(h) > abs(s1 - s):
            h = s1 - s
        if abs(h) < min_step_frac * abs(span):
            raise StepUnderflow(f"step underflow at s = {s:.8g} (movable pole?)")
        ks = [k1]
        bad = False
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            if not np.all(np.isfinite(yi)):
                bad = True
                break
            ks.append(f(s + _C[i] * h, yi))
        if bad:
            h *= 0.25
            stats.rejected += 1
            continue
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks))
        y4 = y + h * sum(b * k for b, k in zip(_B4, ks))
        err = np.linalg.norm(y5 - y4)
        sc = tol * max(np.linalg.norm(y5), np.linalg.norm(y), scale0)
        ratio = err / sc if sc > 0 else 0.0
        if ratio <= 1.0 or not math.isfinite(ratio):
            if not math.isfinite(ratio):
                h *= 0.25
                stats.rejected += 1
                continue
            s += h
            y = y5
            k1 = ks[6] if len(ks) == 7 else f(s, y)
            stats.steps += 1
            stats.max_error = max(stats.max_error, err)
            if record:
                record(s, y, k1)
            # PI controller (order 5, mild damping)
            fac = 0.9 * (ratio + 1e-16) ** (-0.7 / 5.0) * (prev_err + 1e-16) ** (0.4 / 5.0)
            prev_err = ratio
            h *= min(5.0, max(0.2, fac))
        else:
            stats.rejected += 1
            h *= max(0.2, 0.9 * ratio ** (-1.0 / 5.0))
        if stats.steps + stats.rejected > max_steps:
            raise StepUnderflow("step budget exhausted")
    return y, stats


@dataclass(frozen=True)
class Path:
    """A straight segment or logarithmic ray in one coordinate.

    ``coord`` is 'u' or 'z'; ``index`` the 1-based varying slot; the other
    coordinates are frozen from the reference point.  'log' mode moves the
    modulus geometrically at fixed cover argument (for rays spanning decades);
    'linear' interpolates the complex value.
    """

    coord: str
    index: int
    start: complex
    end: complex
    mode: str = "linear"
    arg: float = 0.0  # cover argument of the coordinate in 'log' mode

    def value(self, s: float) -> complex:
        if self.mode == "linear":
            return self.start + s * (self.end - self.start)
        r0, r1 = abs(self.start), abs(self.end)
        return cmath.exp(1j * self.arg) * r0 * (r1 / r0) ** s

    def dvalue(self, s: float) -> complex:
        if self.mode == "linear":
            return self.end - self.start
        r0, r1 = abs(self.start), abs(self.end)
        return self.value(s) * math.log(r1 / r0)


@dataclass
class Trajectory:
    """Samples of the flow along a path plus integration statistics."""

    path: Path
    params: list = field(default_factory=list)
    phis: list = field(default_factory=list)
    derivs: list = field(default_factory=list)
    stats: StepStats = field(default_factory=StepStats)

    def sample(self, param: complex) -> np.ndarray:
        """Cubic Hermite interpolation between accepted steps (by |param|)."""
        xs = [abs(p) for p in self.params]
        t = abs(param)
        if t <= xs[0]:
            return self.phis[0]
        if t >= xs[-1]:
            return self.phis[-1]
        import bisect

        i = bisect.bisect_right(xs, t) - 1
        x0, x1 = xs[i], xs[i + 1]
        hseg = x1 - x0
        w = (t - x0) / hseg
        y0, y1 = self.phis[i], self.phis[i + 1]
        d0, d1 = self.derivs[i] * hseg, self.derivs[i + 1] * hseg
        h00 = 2 * w**3 - 3 * w**2 + 1
        h10 = w**3 - 2 * w**2 + w
        h01 = -2 * w**3 + 3 * w**2
        h11 = w**3 - w**2
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1


def _u_rhs_factory(u_fixed: np.ndarray, k: int, span_check: float = 1e-12):
    n = len(u_fixed)

    def f(s, y, path):
        u = u_fixed.copy()
        u[k - 1] = path.value(s)
        scale = max(np.max(np.abs(u)), 1.0)
        for i in range(n):
            for j in range(i + 1, n):
                if abs(u[i] - u[j]) <= span_check * scale:
                    raise DiagonalHit(f"u_{i+1} ~ u_{j+1} on the path at s={s:.4g}")
        phi = y.reshape(n, n)
        return (rhs_u(u, k, phi) * path.dvalue(s)).reshape(-1)

    return f


def integrate_iso(point, phi_init: np.ndarray, path: Path, tol: float = 1e-10) -> Trajectory:
    """Integrate the isomonodromy flow along ``path`` starting from ``phi_init``.

    ``point`` fixes the non-varying coordinates: a UPoint/array of u values
    for coord 'u', or a ZPoint for coord 'z' (full system, j = index).
    """
    phi_init = np.asarray(phi_init, dtype=complex)
    n = phi_init.shape[0]
    traj = Trajectory(path=path)

    if path.coord == "u":
        u_fixed = np.asarray(point.u if hasattr(point, "u") else point, dtype=complex).copy()
        rhsf = _u_rhs_factory(u_fixed, path.index)

        def f(s, y):
            return rhsf(s, y, path)

        def rec(s, y, dy):
            traj.params.append(path.value(s))
            traj.phis.append(y.reshape(n, n).copy())
            traj.derivs.append(dy.reshape(n, n) / path.dvalue(s))

    elif path.coord == "z":
        zp0: ZPoint = point
        j = path.index

        def f(s, y):
            zval = path.value(s)
            zp = zp0.replace(j, ArgCplx.from_value(zval) if path.mode == "linear"
                             else ArgCplx(abs(zval), path.arg))
            return (rhs_T(zp, j, zp0.n, y.reshape(n, n)) * path.dvalue(s)).reshape(-1)

        def rec(s, y, dy):
            traj.params.append(path.value(s))
            traj.phis.append(y.reshape(n, n).copy())
            traj.derivs.append(dy.reshape(n, n) / path.dvalue(s))

    else:
        raise ValueError("coord must be 'u' or 'z'")

    _, stats = dopri54(f, 0.0, 1.0, phi_init.reshape(-1), tol, record=rec)
    traj.stats = stats
    return traj


def first_integrals(phi: np.ndarray, zp: ZPoint | None, k: int) -> dict:
    """Conserved data of the (k,n)-flow at a point.

    Diagonal entries, eigenvalue multisets of the leading m x m blocks for
    m >= k, and the entries (i, j > k) of (z_1...z_k)^{ad diag} phi.  The
    conjugation by a diagonal is entrywise, so no cancellation occurs.
    """
    phi = np.asarray(phi, dtype=complex)
    n = phi.shape[0]
    out = {"diag": np.diag(phi).copy(), "block_eigs": {}}
    for m in range(k, n + 1):
        lam = np.linalg.eigvals(phi[:m, :m])
        out["block_eigs"][m] = lam[np.lexsort((lam.imag, lam.real))]
    if zp is not None and k < n:
        logz = sum(z.log for z in zp.z[:k])
        lamd = np.diag(phi)
        w = np.exp(np.subtract.outer(lamd, lamd) * logz)
        out["far_entries"] = (w * phi)[k:, k:].copy()
    return out


def integral_drift(records: list[dict]) -> float:
    """Largest absolute drift of any conserved quantity across records."""
    worst = 0.0
    base = records[0]
    for rec in records[1:]:
        worst = max(worst, float(np.max(np.abs(rec["diag"] - base["diag"]))))
        for m, lam in rec["block_eigs"].items():
            worst = max(worst, float(np.max(np.abs(lam - base["block_eigs"][m]))))
        if "far_entries" in rec and rec["far_entries"].size:
            worst = max(worst, float(np.max(np.abs(rec["far_entries"] - base["far_entries"]))))
    return worst


def shrink_experiment(phi_init: np.ndarray, u_init, schedule, tol: float = 1e-10) -> list[list[float]]:
    """Drive u_n along the real schedule and record block eigenvalue gaps.

    Returns CSV-ready rows [u_n, re_gap, Re lam, Im lam, ...] where re_gap is
    the largest |Re| eigenvalue gap of the leading (n-1)-block and the tail
    lists eigenvalues of every leading block, k = 1..n.
    """
    phi_init = np.asarray(phi_init, dtype=complex)
    u = np.asarray(u_init, dtype=complex).copy()
    n = phi_init.shape[0]
    schedule = [float(s) for s in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    rows = []
    phi = phi_init

    def emit(u_val, phi_val):
        lam_top = np.linalg.eigvals(phi_val[: n - 1, : n - 1])
        gap = max(
            abs((lam_top[i] - lam_top[j]).real) for i in range(n - 1) for j in range(n - 1)
        ) if n > 1 else 0.0
        row = [float(u_val), float(gap)]
        for m in range(1, n + 1):
            lam = np.linalg.eigvals(phi_val[:m, :m])
            lam = lam[np.lexsort((lam.imag, lam.real))]
            for v in lam:
                row.extend([float(v.real), float(v.imag)])
        rows.append(row)

    if abs(u[n - 1] - schedule[0]) > 1e-12 * max(1.0, abs(schedule[0])):
        path = Path("u", n, complex(u[n - 1]), complex(schedule[0]))
        traj = integrate_iso(u, phi, path, tol)
        phi = traj.phis[-1]
        u[n - 1] = schedule[0]
    emit(schedule[0], phi)
    for target in schedule[1:]:
        path = Path("u", n, complex(u[n - 1]), complex(target))
        traj = integrate_iso(u, phi, path, tol)
        phi = traj.phis[-1]
        u[n - 1] = target
        emit(target, phi)
    return rows


def csv_header(n: int) -> str:
    cols = ["param", "re_gap"]
    for m in range(1, n + 1):
        for j in range(1, m + 1):
            cols.extend([f"lam{m}_{j}_re", f"lam{m}_{j}_im"])
    return ",".join(cols)


def rows_to_csv(rows: list[list[float]], n: int) -> str:
    lines = [csv_header(n)]
    for row in rows:
        lines.append(",".join(f"{v:.15g}" for v in row))
    return "\n".join(lines) + "\n"


def estimate_boundary(params, phis, dec, arg: float = 0.0, k: int | None = None):
    """Richardson-style limit of the conjugated solution as |z_k| grows.

    ``params``/``phis`` sample a trajectory at geometrically spaced |z_k|;
    ``dec`` is the spectral data of the limiting leading block used for the
    conjugation.  Returns (limit estimate, fitted decay exponent).
    """
    if len(params) < 3:
        raise ValueError("need at least three geometric samples")
    hats = []
    for p, phi in zip(params, phis):
        logz = math.log(abs(p)) + 1j * arg
        hats.append(dec.conjugate_power(logz, np.asarray(phi, dtype=complex)))
    d1 = np.linalg.norm(hats[-2] - hats[-3])
    d2 = np.linalg.norm(hats[-1] - hats[-2])
    r = abs(params[-1]) / abs(params[-2])
    if d1 <= 0 or d2 <= 0:
        return hats[-1], math.inf
    rho = d2 / d1
    if rho >= 0.98:
        from .errors import NoConvergence

        raise NoConvergence("conjugated samples do not settle")
    eps_fit = -math.log(rho) / math.log(r)
    limit = hats[-1] + (hats[-1] - hats[-2]) * (rho / (1.0 - rho))
    return limit, eps_fit


def skew_invariant_check(phi_init: np.ndarray, point, path: Path, tol: float = 1e-10) -> dict:
    """Drift of the Frobenius norm and of phi + phi^dagger along a real path."""
    traj = integrate_iso(point, np.asarray(phi_init, dtype=complex), path, tol)
    fro = [float(np.linalg.norm(p, ord="fro")) for p in traj.phis]
    herm = [float(np.linalg.norm(p + p.conj().T, ord=2)) for p in traj.phis]
    return {
        "fro_drift": max(fro) - min(fro),
        "herm_drift": max(herm) - min(herm),
        "herm_max": max(herm),
        "trajectory": traj,
    }
