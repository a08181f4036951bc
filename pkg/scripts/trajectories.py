"""Energy-optimal and time-optimal trajectories for a few targets, as CSV.

Each file holds the waypoint table produced by the planner, ready for
plotting the flight path and the per-segment speed profile.

    python scripts/trajectories.py --q 5e6 200e6 --out results/trajectories
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from uavplan import fhc, joint
from uavplan.scenario import SolverSettings, default_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, nargs="+", default=[5e6, 200e6])
    ap.add_argument("--out", default="results/trajectories")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    st = SolverSettings()
    with open(out / "nodes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gn", "x_m", "y_m"])
        for k, p in enumerate(default_scenario().gn_positions, 1):
            w.writerow([k, *p])
    for Q in args.q:
        sc = default_scenario(Q)
        plan = fhc.solve_multi_gn(sc, st)
        fhc.fhc_to_trajectory(plan, sc, st.delta_max).write_csv(out / f"fhc_{Q:.0f}.csv")
        init = joint.init_from_fhc(sc, st, plan)
        for kind in joint.OBJECTIVES:
            traj, _ = joint.optimize(sc, st, kind, init)
            traj.write_csv(out / f"joint_{kind}_{Q:.0f}.csv")
            v = traj.speeds
            print(f"Q={Q:.3g} {kind:6s}: {traj.mission_time:7.1f} s, speed range "
                  f"{np.min(v):.1f}-{np.max(v):.1f} m/s")


if __name__ == "__main__":
    main()
