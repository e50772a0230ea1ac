#!/usr/bin/env python3
"""Reproduce the pool-style coverage benchmark end to end through the CLI.

Generates a labeled training set, trains the pixel classifier, simulates and
renders one survey mission per coverage level, estimates each one with both
oracle masks and the classifier, and writes the error tables.

Usage:
    python scripts/run_pool_benchmark.py --out runs/pool [--quick]
"""

import argparse
import subprocess
import sys
from pathlib import Path

COVERAGES = [0.22, 0.33, 0.44, 0.66]
TRAIN_COVERAGES = [0.0, 0.15, 0.3, 0.45, 0.6]

MISSION_CFG = """
scene.net_width = 12.0
scene.net_height = 0.9
plan.x_min = 0.4
plan.x_max = 11.6
plan.z_min = 0.225
plan.z_max = 0.675
plan.n_horizontal = 6
plan.n_vertical = 2
plan.standoff = 1.0
plan.speed_target = 0.15
sense.sigma_xy = 0.0
sense.sigma_z = 0.0
sim.seed = 1
"""


def run(*argv):
    cmd = [sys.executable, "-m", "pengauge.cli", *map(str, argv)]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/pool")
    ap.add_argument("--quick", action="store_true", help="smaller net, fewer frames")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "mission.cfg"
    text = MISSION_CFG
    if args.quick:
        text = text.replace("12.0", "4.0").replace("11.6", "3.6")
    cfg.write_text(text, encoding="utf-8")

    labeled = out / "labeled"
    if not (labeled / "index.tsv").exists():
        for i, cov in enumerate(TRAIN_COVERAGES):
            run("synth", "scene", "--config", cfg, "--out", labeled, "--count", "4", "--labeled",
                "--prefix", f"c{i}_", "--set", f"scene.coverage={cov}",
                "--set", f"scene.seed={100 + 10 * i}",
                "--set", "scene.net_width=", "--set", "scene.net_height=")
    run("train", "--config", cfg, "--dataset", labeled, "--out", out / "classifier.txt",
        "--report", out / "train_report.json")

    missions = []
    for cov in COVERAGES:
        mdir = out / f"cov{int(cov * 100):02d}"
        missions.append(mdir)
        if not (mdir / "truth.tsv").exists():
            run("synth", "mission", "--config", cfg, "--out", mdir,
                "--set", f"scene.coverage={cov}", "--set", "scene.seed=31")
        run("estimate", "--config", cfg, "--mission", mdir,
            "--external-masks", mdir / "masks", "--out", mdir / "report_oracle.json")
        run("estimate", "--config", cfg, "--mission", mdir,
            "--classifier", out / "classifier.txt", "--out", mdir / "report.json")

    print("\n== oracle-mask estimates ==")
    run("evaluate", "--missions", *missions, "--report-name", "report_oracle.json",
        "--out", out / "table_oracle.csv")
    print("\n== classifier estimates ==")
    run("evaluate", "--missions", *missions, "--out", out / "table_classifier.csv")
    print(f"\nerror tables in {out}/table_*.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
