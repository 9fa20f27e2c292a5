#!/usr/bin/env python3
"""Render the shrinking-phenomenon curve from a gap-experiment CSV.

Usage: plot_shrink.py IN.csv OUT.png [--ymax YMAX]

The input is the delimited output of the shrink experiment: a ``param``
column (the driven coordinate) and a ``re_gap`` column (largest |Re|
eigenvalue gap of the leading block), plus eigenvalue columns that are
ignored here.  The figure shows the gap against the parameter with a
horizontal reference line at gap = 1, the boundary the curve must
eventually stay below.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED = ("param", "re_gap")


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != REQUIRED[0] or header[1] != REQUIRED[1]:
            raise SystemExit(
                f"schema mismatch: expected columns {REQUIRED[0]},{REQUIRED[1]},..., "
                f"got {header[:2] if header else 'empty file'}"
            )
        rows = [(float(r[0]), float(r[1])) for r in reader]
    if not rows:
        raise SystemExit("schema mismatch: no data rows")
    return rows


def render(rows, out_path, ymax=None):
    xs = [r[0] for r in rows]
    gaps = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(xs, gaps, lw=1.2, color="#1f77b4", label="largest |Re| eigenvalue gap")
    ax.axhline(1.0, color="#d62728", lw=1.0, ls="--", label="gap = 1")
    ax.set_xscale("log")
    ax.set_xlabel("driven coordinate")
    ax.set_ylabel("leading-block eigenvalue gap")
    ax.set_ylim(0.0, ymax if ymax is not None else max(2.0, 1.1 * max(gaps)))
    ax.legend(frameon=False, fontsize=9)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="gap-experiment CSV")
    parser.add_argument("output", help="PNG to write")
    parser.add_argument("--ymax", type=float, default=None, help="upper y limit")
    args = parser.parse_args(argv)
    render(read_rows(args.input), args.output, args.ymax)
    return 0


if __name__ == "__main__":
    sys.exit(main())
