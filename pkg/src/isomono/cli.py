"""Command-line entry point.

One subcommand per capability; every run is driven by a JSON config (with
dotted --set overrides), writes a CSV or JSON file, and is deterministic for
a fixed config.  Numerical failures exit with code 1 and the machine-readable
error name on stderr; config problems exit with code 2.

Matrices are encoded as {"n": int, "entries": [[[re, im], ...], ...]},
row-major; angles are radians on the universal cover.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .cmatrix import ArgCplx
from .errors import ConfigError, IsomonoError
from .flow import Path, integrate_iso, rows_to_csv, shrink_experiment
from .inverse import solve_phi0
from .monodromy import CaterpillarAngles, caterpillar_nu, lu_split, md_cat, stokes_Ek
from .operators import ZPoint
from .series import ShrinkingSolution

log = logging.getLogger("isomono")

SCHEMA = "isomono-result/1"

DEMO_PHI = [
    [[1.35, 3.46], [-1.48, 0.09], [0.91, 3.92]],
    [[1.49, 1.75], [0.48, 6.48], [7.42, 2.48]],
    [[2.40, 2.06], [1.04, 0.08], [9.16, 0.84]],
]


def mat_to_doc(x) -> dict:
    x = np.asarray(x, dtype=complex)
    return {
        "n": int(x.shape[0]),
        "entries": [[[float(v.real), float(v.imag)] for v in row] for row in x],
    }


def mat_from_doc(doc) -> np.ndarray:
    try:
        n = int(doc["n"])
        out = np.array(
            [[complex(e[0], e[1]) for e in row] for row in doc["entries"]], dtype=complex
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"bad matrix encoding: {exc}") from exc
    if out.shape != (n, n):
        raise ConfigError(f"matrix entries do not form an {n} x {n} grid")
    return out


def cplx_from_doc(doc) -> complex:
    if isinstance(doc, (int, float)):
        return complex(doc)
    if isinstance(doc, list) and len(doc) == 2:
        return complex(doc[0], doc[1])
    raise ConfigError(f"bad complex number encoding: {doc!r}")


def _set_path(cfg: dict, dotted: str, value: str):
    keys = dotted.split(".")
    cur = cfg
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"--set path {dotted} crosses a non-object")
    try:
        cur[keys[-1]] = json.loads(value)
    except json.JSONDecodeError:
        cur[keys[-1]] = value


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a JSON object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, val = item.split("=", 1)
        _set_path(cfg, key, val)
    return cfg


def write_out(args, text: str):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _json_result(payload: dict) -> str:
    payload = {"schema": SCHEMA, "version": __version__, **payload}
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def cmd_shrink_demo(args) -> int:
    cfg = load_config(args)
    phi = mat_from_doc(cfg.get("phi_init", {"n": 3, "entries": DEMO_PHI}))
    u_init = [cplx_from_doc(v) for v in cfg.get("u_init", [[1.0, 1.0], [3.0, 1.0], [7.65, 0.0]])]
    end = float(cfg.get("u_end", 500.0))
    count = int(cfg.get("samples", 80))
    start = u_init[-1].real
    schedule = list(np.geomspace(start, end, count))
    tol = float(cfg.get("tol", 1e-10))
    rows = shrink_experiment(phi, u_init, schedule, tol=tol)
    write_out(args, rows_to_csv(rows, phi.shape[0]))
    final_gap = rows[-1][1]
    log.info("final |Re| gap: %.6g", final_gap)
    return 0 if final_gap < 1.0 else 1


def cmd_series(args) -> int:
    cfg = load_config(args)
    phi0 = mat_from_doc(_require(cfg, "phi0"))
    eps = float(cfg.get("eps", 0.2))
    z = _zpoint_from(cfg, phi0.shape[0])
    sol = ShrinkingSolution(phi0.shape[0], phi0, eps=eps)
    value = sol.evaluate(z) if cfg.get("evaluate", True) else None
    doc = json.loads(sol.to_json(z))
    if value is not None:
        doc["value"] = mat_to_doc(value)
    write_out(args, _json_result(doc))
    return 0


def cmd_evolve(args) -> int:
    cfg = load_config(args)
    phi = mat_from_doc(_require(cfg, "phi_init"))
    coord = cfg.get("coord", "u")
    index = int(cfg.get("index", phi.shape[0]))
    start = cplx_from_doc(_require(cfg, "start"))
    end = cplx_from_doc(_require(cfg, "end"))
    mode = cfg.get("mode", "linear")
    path = Path(coord, index, start, end, mode=mode, arg=float(cfg.get("arg", 0.0)))
    if coord == "u":
        point = np.array([cplx_from_doc(v) for v in _require(cfg, "u")], dtype=complex)
    else:
        point = _zpoint_from(cfg, phi.shape[0])
    traj = integrate_iso(point, phi, path, tol=float(cfg.get("tol", 1e-10)))
    lines = ["param_re,param_im," + ",".join(
        f"phi_{i+1}{j+1}_{p}" for i in range(phi.shape[0]) for j in range(phi.shape[0])
        for p in ("re", "im"))]
    stride = max(1, len(traj.params) // int(cfg.get("samples", 200)))
    for p, m in list(zip(traj.params, traj.phis))[::stride]:
        vals = [f"{p.real:.15g}", f"{p.imag:.15g}"]
        for i in range(phi.shape[0]):
            for j in range(phi.shape[0]):
                vals.extend([f"{m[i, j].real:.15g}", f"{m[i, j].imag:.15g}"])
        lines.append(",".join(vals))
    write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_stokes(args) -> int:
    cfg = load_config(args)
    if cfg.get("rational_fixture"):
        from .drivers import rational_fixture_matrix

        a = rational_fixture_matrix(int(cfg.get("n", 3)), int(cfg.get("seed", 7)))
    else:
        a = mat_from_doc(_require(cfg, "a"))
    k = int(cfg.get("k", a.shape[0]))
    d = float(cfg.get("d", -math.pi / 2))
    pair = stokes_Ek(k, a, d)
    write_out(
        args,
        _json_result(
            {
                "k": k,
                "d": d,
                "s_plus": mat_to_doc(pair.s_plus),
                "s_minus": mat_to_doc(pair.s_minus),
                "formal_diag": mat_to_doc(pair.formal_diag),
            }
        ),
    )
    return 0


def cmd_caterpillar(args) -> int:
    cfg = load_config(args)
    phi0 = mat_from_doc(_require(cfg, "phi0"))
    n = phi0.shape[0]
    d = float(cfg.get("d", -math.pi / 2))
    theta = tuple(float(t) for t in cfg.get("theta", [0.0] * n))
    md = md_cat(phi0, CaterpillarAngles(d, theta))
    write_out(
        args,
        _json_result(
            {
                "nu": mat_to_doc(md.nu),
                "sigma": [[s.real, s.imag] for s in md.sigma],
                "lambda": mat_to_doc(md.lam),
                "consistency": md.check(),
            }
        ),
    )
    return 0


def cmd_invert(args) -> int:
    cfg = load_config(args)
    v = mat_from_doc(_require(cfg, "nu"))
    sigma = [cplx_from_doc(s) for s in _require(cfg, "sigma")]
    lam = mat_from_doc(_require(cfg, "lambda"))
    tol = float(cfg.get("tol", 1e-8))
    phi0 = solve_phi0(v, sigma, lam, tol=tol)
    write_out(args, _json_result({"phi0": mat_to_doc(phi0)}))
    return 0


def cmd_oracle_check(args) -> int:
    cfg = load_config(args)
    from .monodromy import connection_Ek
    from .oracle import connection_numeric

    n = int(cfg.get("n", 2))
    count = int(cfg.get("count", 3))
    seed = int(cfg.get("seed", 2024))
    d = float(cfg.get("d", -math.pi / 2))
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < count:
        a = 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        lam = np.linalg.eigvals(a)
        gaps = [lam[i] - lam[j] for i in range(n) for j in range(n) if i != j]
        if not all(abs(g - round(g.real)) > 0.12 and abs(g) > 0.1 for g in gaps):
            continue
        c_formula, _ = connection_Ek(n, a, d)
        u = np.zeros(n)
        u[n - 1] = 1.0
        est = connection_numeric(u, a, d)
        worst = max(worst, float(np.linalg.norm(c_formula - est.c, ord=2)))
        done += 1
    write_out(args, _json_result({"n": n, "count": count, "max_discrepancy": worst}))
    log.info("max formula-vs-oracle discrepancy: %.3g", worst)
    return 0 if worst < float(cfg.get("tol", 1e-6)) else 1


def cmd_pvi(args) -> int:
    cfg = load_config(args)
    from .pvi import pvi_curve, pvi_residual

    phi0 = mat_from_doc(_require(cfg, "phi0"))
    x_lo = float(cfg.get("x_min", 0.05))
    x_hi = float(cfg.get("x_max", 0.5))
    count = int(cfg.get("samples", 91))
    xs = np.linspace(x_lo, x_hi, count)
    curve = pvi_curve(phi0, xs, eps=float(cfg.get("eps", 0.2)))
    res, pts, scale = pvi_residual(curve.xs, curve.ys, curve.params)
    lines = ["x,y_re,y_im,residual"]
    resid_by_idx = {i + 2: r for i, r in enumerate(pts)}
    for i, (x, y) in enumerate(zip(curve.xs, curve.ys)):
        lines.append(
            f"{x:.15g},{y.real:.15g},{y.imag:.15g},{resid_by_idx.get(i, float('nan')):.15g}"
        )
    write_out(args, "\n".join(lines) + "\n")
    log.info("max residual %.3g at scale %.3g", res, scale)
    return 0


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config key {key!r} is required")
    return cfg[key]


def _zpoint_from(cfg: dict, n: int) -> ZPoint:
    doc = _require(cfg, "z")
    if not isinstance(doc, list) or len(doc) != n:
        raise ConfigError(f"'z' must be a list of {n} coordinates")
    zs = []
    for item in doc:
        if isinstance(item, dict):
            zs.append(ArgCplx(float(item["mod"]), float(item["arg"])))
        else:
            zs.append(ArgCplx.from_value(cplx_from_doc(item)))
    return ZPoint(n, tuple(zs))


_COMMANDS = {
    "shrink-demo": cmd_shrink_demo,
    "series": cmd_series,
    "evolve": cmd_evolve,
    "stokes": cmd_stokes,
    "caterpillar": cmd_caterpillar,
    "invert": cmd_invert,
    "oracle-check": cmd_oracle_check,
    "pvi": cmd_pvi,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isomono",
        description="Series solutions, Stokes data and inverse monodromy "
        "of the n-th isomonodromy equation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override (JSON-parsed value)")
        p.add_argument("--out", help="output file (default: stdout)")
    return parser


def main(argv=None) -> int:
    level = {"off": logging.CRITICAL, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("ISO_LOG", "off"), logging.CRITICAL
    )
    logging.basicConfig(stream=sys.stderr, level=level, format="isomono: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"{exc.name}: {exc}\n")
        return 2
    except IsomonoError as exc:
        sys.stderr.write(f"{exc.name}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
