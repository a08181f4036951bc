"""Power and energy-per-meter curves with the characteristic speeds marked.

    python scripts/power_curve.py --out results/power
"""
import argparse
import csv
import json
from pathlib import Path

import numpy as np

from uavplan import rotor_power


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/power")
    ap.add_argument("--v-max", type=float, default=60.0)
    ap.add_argument("--step", type=float, default=0.1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    p = rotor_power.derive_params(rotor_power.PAPER_TABLE_1)
    V = np.arange(args.step, args.v_max + args.step / 2, args.step)
    blade, induced, parasite = rotor_power.power_components(p, V)
    total = blade + induced + parasite
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["V_mps", "P_total_W", "P_blade_W", "P_induced_W", "P_parasite_W",
                    "P_approx_W", "E0_J_per_m"])
        for row in zip(V, total, blade, induced, parasite, rotor_power.power_approx(p, V), total / V):
            w.writerow([f"{x:.10g}" for x in row])
    V_me, V_mr = rotor_power.characteristic_speeds(p, args.v_max)
    info = {"V_me_mps": V_me, "V_mr_mps": V_mr, "P_hover_W": p.P_h,
            "P_at_V_me_W": float(rotor_power.power(p, V_me)),
            "E0_star_J_per_m": float(rotor_power.energy_per_meter(p, V_mr))}
    (out / "speeds.json").write_text(json.dumps(info, indent=2) + "\n")
    print(json.dumps(info, indent=2))


if __name__ == "__main__":
    main()
