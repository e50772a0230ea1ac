#!/usr/bin/env python3
"""3-D plot of a logged mission: true track, measured fixes, and the ideal line.

Usage:
    python scripts/plot_mission.py runs/sim/trajectory.csv [--ideal runs/sim/ideal_track.csv] [--out track.png]

Positions are plotted once per second, like the survey's capture cadence.
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load_trajectory(path):
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    data = [line.split(",") for line in rows[1:] if line]
    t = np.array([float(r[0]) for r in data])
    true = np.array([[float(r[1]), float(r[2]), float(r[3])] for r in data])
    meas = np.array([[float(r[4]), float(r[5]), float(r[6])] for r in data])
    return t, true, meas


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("trajectory")
    ap.add_argument("--ideal", default=None)
    ap.add_argument("--out", default="mission_track.png")
    args = ap.parse_args()

    t, true, meas = load_trajectory(args.trajectory)
    keep = np.isclose(t % 1.0, 0.0) | np.isclose(t % 1.0, 1.0)

    fig = plt.figure(figsize=(9, 6))
    ax = fig.add_subplot(projection="3d")
    sc = ax.scatter(true[keep, 0], true[keep, 1], true[keep, 2], c=t[keep], s=6, cmap="viridis", label="true position")
    ax.scatter(meas[keep, 0], meas[keep, 1], meas[keep, 2], c="lightgray", s=2, alpha=0.5, label="acoustic fixes")
    if args.ideal:
        rows = Path(args.ideal).read_text(encoding="utf-8").splitlines()[1:]
        ideal = np.array([[float(v) for v in r.split(",")] for r in rows if r])
        ax.plot(ideal[:, 0], ideal[:, 1], ideal[:, 2], "b-", linewidth=1.5, label="ideal track")
    ax.set_xlabel("x along net [m]")
    ax.set_ylabel("y standoff [m]")
    ax.set_zlabel("z depth [m]")
    ax.invert_zaxis()
    ax.legend(loc="upper left")
    fig.colorbar(sc, label="t [s]", shrink=0.6)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
