#!/usr/bin/env python3
"""Render a trajectory trace CSV over potential contours with termination markers.

Reads the CSV written by ``geonuts trajectory`` (columns step, t, q1..qd,
p1..pd, H, crit_classic, crit_generalized, fired_classic, fired_generalized)
and draws the path over contours of the chosen target potential, marking the
first row at which each criterion fired.  One-dimensional traces are drawn as
q1 against t instead.

This script is a pure consumer of the CSV: it never calls back into the
sampling library, so the potential formulas are duplicated here (they must
match geonuts.targets.GaussianTarget / BananaTarget).

Usage:
    python plot_trajectory.py --trace traj.csv --target banana \
        --beta 0.03 --sigma1 10 --sigma2 1 --out fig.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("step", "t", "q1", "crit_classic", "crit_generalized",
                    "fired_classic", "fired_generalized")

MARKER_STYLE = {
    "classic": dict(marker="o", color="tab:red", s=90, zorder=5),
    "generalized": dict(marker="*", color="tab:purple", s=160, zorder=5),
}


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trace", required=True, help="trajectory CSV path")
    ap.add_argument("--target", choices=["gaussian", "banana"], default="gaussian",
                    help="potential used for the contour background")
    ap.add_argument("--rho", type=float, default=0.95, help="gaussian correlation")
    ap.add_argument("--beta", type=float, default=0.03, help="banana warp strength")
    ap.add_argument("--sigma1", type=float, default=0.01, help="banana first scale")
    ap.add_argument("--sigma2", type=float, default=1.0, help="banana second scale")
    ap.add_argument("--out", required=True, help="output image path")
    return ap.parse_args(argv)


def load_trace(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.shape == () or data.size == 0:
        raise SystemExit(f"error: trace {path} is empty")
    names = data.dtype.names or ()
    for column in REQUIRED_COLUMNS:
        if column not in names:
            raise SystemExit(f"error: trace {path} is missing required column '{column}'")
    return data


def gaussian_potential(q1, q2, rho):
    # matches geonuts.targets.GaussianTarget with sigma = [[1, rho], [rho, 1]]
    det = 1.0 - rho * rho
    return 0.5 * (q1 * q1 - 2.0 * rho * q1 * q2 + q2 * q2) / det


def banana_potential(q1, q2, beta, sigma1, sigma2):
    # matches geonuts.targets.BananaTarget
    warp = q2 + beta * q1**2 - 100.0 * beta
    return 0.5 * (q1**2 / sigma1**2 + warp**2 / sigma2**2)


def first_fired(data, which):
    flags = np.atleast_1d(data[f"fired_{which}"])
    hits = np.nonzero(flags > 0)[0]
    return int(hits[0]) if hits.size else None


def main(argv=None):
    args = parse_args(argv)
    data = load_trace(args.trace)
    t = np.atleast_1d(data["t"])
    q1 = np.atleast_1d(data["q1"])
    two_dim = "q2" in data.dtype.names
    q2 = np.atleast_1d(data["q2"]) if two_dim else None

    fig, ax = plt.subplots(figsize=(8.0, 6.0))
    if two_dim:
        pad1 = 0.15 * max(float(np.ptp(q1)), 1e-3)
        pad2 = 0.15 * max(float(np.ptp(q2)), 1e-3)
        g1 = np.linspace(q1.min() - pad1, q1.max() + pad1, 300)
        g2 = np.linspace(q2.min() - pad2, q2.max() + pad2, 300)
        m1, m2 = np.meshgrid(g1, g2)
        if args.target == "banana":
            v = banana_potential(m1, m2, args.beta, args.sigma1, args.sigma2)
        else:
            v = gaussian_potential(m1, m2, args.rho)
        levels = np.quantile(v, np.linspace(0.02, 0.9, 12))
        ax.contour(m1, m2, v, levels=np.unique(levels), colors="gray",
                   linewidths=0.7, alpha=0.6)
        ax.plot(q1, q2, color="tab:blue", lw=1.0, label="trajectory")
        ax.plot(q1[0], q2[0], marker="s", color="black", ms=7, ls="none", label="start")
        ax.set_xlabel("$q_1$")
        ax.set_ylabel("$q_2$")
    else:
        ax.plot(t, q1, color="tab:blue", lw=1.0, label="trajectory")
        ax.plot(t[0], q1[0], marker="s", color="black", ms=7, ls="none", label="start")
        ax.set_xlabel("t")
        ax.set_ylabel("$q_1$")

    any_fired = False
    for which in ("classic", "generalized"):
        k = first_fired(data, which)
        if k is None:
            print(f"warning: {which} criterion never fired in {args.trace}")
            continue
        any_fired = True
        x = q1[k]
        y = q2[k] if two_dim else x
        if not two_dim:
            x = t[k]
        ax.scatter([x], [y], label=f"{which} fired (t={t[k]:g})", **MARKER_STYLE[which])
        print(f"{which} fired at step {int(np.atleast_1d(data['step'])[k])}, t={t[k]:g}")
    if not any_fired:
        print("warning: no termination markers to draw")

    ax.legend(loc="best", fontsize=9)
    ax.set_title(f"trajectory over {args.target} potential")
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
