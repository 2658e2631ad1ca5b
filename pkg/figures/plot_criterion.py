#!/usr/bin/env python3
"""Plot both termination-criterion values against time from a trajectory CSV.

Reads the CSV written by ``geonuts trajectory`` and draws crit_classic and
crit_generalized against t with a zero line; the first firing of each
criterion is marked.  Pure CSV consumer, no dependency on the sampling
library.

Usage:
    python plot_criterion.py --trace traj.csv --out fig.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("t", "crit_classic", "crit_generalized")


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trace", required=True, help="trajectory CSV path")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--log-time", action="store_true", help="logarithmic time axis")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    data = np.genfromtxt(args.trace, delimiter=",", names=True)
    if data.shape == () or data.size == 0:
        raise SystemExit(f"error: trace {args.trace} is empty")
    names = data.dtype.names or ()
    for column in REQUIRED_COLUMNS:
        if column not in names:
            raise SystemExit(f"error: trace {args.trace} is missing required column '{column}'")

    t = np.atleast_1d(data["t"])
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    ax.axhline(0.0, color="black", lw=0.8)
    for which, color in (("classic", "tab:red"), ("generalized", "tab:purple")):
        values = np.atleast_1d(data[f"crit_{which}"])
        if not np.any(np.isfinite(values)):
            raise SystemExit(f"error: column 'crit_{which}' has no finite values")
        ax.plot(t, values, color=color, lw=1.0, label=which)
        hits = np.nonzero(values < 0.0)[0]
        if hits.size:
            k = int(hits[0])
            ax.scatter([t[k]], [values[k]], color=color, marker="v", s=70, zorder=5)
            print(f"{which} first went negative at t={t[k]:g}")
        else:
            print(f"warning: {which} criterion never fired in {args.trace}")
    if args.log_time:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("criterion value")
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
