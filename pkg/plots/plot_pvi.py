#!/usr/bin/env python3
"""Render a transcendent curve y(x) with its equation residual.

Usage: plot_pvi.py IN.csv OUT.png [--overlay J SIGMA_RE SIGMA_IM]

The input is the delimited output of the transcendent sweep with columns
``x,y_re,y_im,residual``.  The top panel shows Re y and Im y against x,
optionally overlaid with the small-x asymptote |J| x^(1 - Re sigma); the
bottom panel shows the residual on a log scale.
"""

import argparse
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED = ["x", "y_re", "y_im", "residual"]


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REQUIRED:
            raise SystemExit(f"schema mismatch: expected {REQUIRED}, got {header}")
        rows = []
        for r in reader:
            rows.append((float(r[0]), float(r[1]), float(r[2]),
                         float(r[3]) if r[3] not in ("", "nan") else math.nan))
    if not rows:
        raise SystemExit("schema mismatch: no data rows")
    return rows


def render(rows, out_path, overlay=None):
    xs = [r[0] for r in rows]
    fig, (ax, axr) = plt.subplots(
        2, 1, figsize=(7.0, 5.4), sharex=True, height_ratios=[2.2, 1.0]
    )
    ax.plot(xs, [r[1] for r in rows], lw=1.2, color="#1f77b4", label="Re y")
    ax.plot(xs, [r[2] for r in rows], lw=1.2, color="#2ca02c", label="Im y")
    if overlay is not None:
        j_abs, sig_re = overlay
        ax.plot(xs, [j_abs * x ** (1.0 - sig_re) for x in xs], lw=1.0, ls=":",
                color="#7f7f7f", label="leading small-x power")
    ax.set_ylabel("transcendent y")
    ax.legend(frameon=False, fontsize=9)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    finite = [(x, r) for x, r in ((r[0], r[3]) for r in rows) if not math.isnan(r)]
    if finite:
        axr.semilogy([p[0] for p in finite], [max(p[1], 1e-18) for p in finite],
                     lw=1.0, color="#9467bd")
    axr.set_xlabel("x")
    axr.set_ylabel("equation residual")
    axr.spines["top"].set_visible(False)
    axr.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="transcendent sweep CSV")
    parser.add_argument("output", help="PNG to write")
    parser.add_argument("--overlay", nargs=2, type=float, metavar=("ABS_J", "SIGMA_RE"),
                        default=None, help="overlay |J| x^(1 - Re sigma)")
    args = parser.parse_args(argv)
    render(read_rows(args.input), args.output, args.overlay)
    return 0


if __name__ == "__main__":
    sys.exit(main())
