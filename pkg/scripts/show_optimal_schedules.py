#!/usr/bin/env python3
"""Print the analytical optimal selling schedule for each desk client and
the effect of risk aversion on the schedule shape.

Example:
    python scripts/show_optimal_schedules.py
    python scripts/show_optimal_schedules.py --risk-aversion 1e-3
"""

import argparse

import numpy as np

from fairliq.analytics import optimal_trajectory, utility
from fairliq.experiment import desk_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--risk-aversion", type=float, default=None)
    args = parser.parse_args()

    scenario = desk_scenario()
    params = scenario.market
    print(f"horizon {params.horizon_days} days, {params.num_trades} trades, tau={params.tau}")
    print(f"{'client':10s} {'shares':>8s} {'lambda':>8s} {'U*':>12s} {'E*':>12s} "
          f"{'first-step fraction':>20s}")
    for spec in scenario.agents:
        lam = args.risk_aversion if args.risk_aversion is not None else spec.risk_aversion
        traj = optimal_trajectory(spec.initial_shares, params.num_trades, params, lam)
        u = utility(traj, params, lam)
        print(
            f"{spec.label:10s} {spec.initial_shares:8.0f} {lam:8.0e} "
            f"{u.utility:12.2f} {u.expected_shortfall:12.2f} "
            f"{traj.sales[0] / spec.initial_shares:20.4f}"
        )

    lam_grid = [0.0, 1e-6, 1e-5, 1e-4, 1e-3]
    x0 = scenario.agents[0].initial_shares
    print(f"\nfirst five selling fractions for {x0:.0f} shares as risk aversion grows:")
    for lam in lam_grid:
        traj = optimal_trajectory(x0, params.num_trades, params, lam)
        head = np.round(traj.sales[:5] / x0, 4)
        print(f"  lambda={lam:7.0e}: {head.tolist()}")


if __name__ == "__main__":
    main()
