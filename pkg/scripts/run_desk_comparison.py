#!/usr/bin/env python3
"""Train the plain and fairness-adjusted variants on the desk scenario
and print a comparison table.

Example:
    python scripts/run_desk_comparison.py --seeds 1,2,3 --out runs/desk
"""

import argparse
import time
from pathlib import Path

import numpy as np

from fairliq.experiment import analytical_baseline, desk_scenario, run_comparison


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="1,2,3", help="comma-separated seeds")
    parser.add_argument("--episodes", type=int, default=None, help="override episode count")
    parser.add_argument("--out", default="runs/desk", help="output directory")
    args = parser.parse_args()

    scenario = desk_scenario()
    if args.episodes is not None:
        from dataclasses import replace

        scenario.train = replace(scenario.train, episodes=args.episodes)
    seeds = [int(s) for s in args.seeds.split(",")]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    base = analytical_baseline(scenario)
    print(f"analytical baseline total shortfall: {base.total_shortfall:.2f}")

    t0 = time.time()

    def progress(variant, seed, summary):
        print(
            f"[{time.time() - t0:7.1f}s] {variant:5s} seed {seed}: "
            f"total {summary.total_shortfall:9.2f} "
            f"(x{summary.total_shortfall / base.total_shortfall:.2f} of baseline)"
        )

    report = run_comparison(scenario, seeds=seeds, progress=progress)
    report.save(out / "report.json")

    print(f"\n{'variant':8s} {'median total':>14s} {'median pair dispersion':>24s}")
    for variant in ("plain", "ggi"):
        runs = report.runs_for(variant)
        totals = [r.summary.total_shortfall for r in runs]
        disps = [float(np.mean(list(r.summary.pair_dispersion.values()))) for r in runs]
        print(f"{variant:8s} {np.median(totals):14.2f} {np.median(disps):24.6f}")
    print(f"\nreport written to {out / 'report.json'}")


if __name__ == "__main__":
    main()
