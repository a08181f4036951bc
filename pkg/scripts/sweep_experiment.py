"""Energy and mission time of all five schemes across throughput targets.

    python scripts/sweep_experiment.py --out results/sweep
"""
import argparse
import csv
import time
from pathlib import Path

from uavplan import experiments
from uavplan.scenario import SolverSettings, default_scenario, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, nargs="+", default=[5e6, 10e6, 20e6, 50e6, 100e6, 200e6])
    ap.add_argument("--scenario", help="scenario YAML (default: built-in layout)")
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc, st = load_scenario(args.scenario) if args.scenario else (default_scenario(), SolverSettings())

    t0 = time.perf_counter()
    rows = experiments.sweep(sc, args.q, st)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["Q_bits", "scheme", "energy_J", "time_s", "status"])
        w.writeheader()
        w.writerows(rows)

    print(f"{'Q (Mbit)':>9} " + " ".join(f"{s:>17}" for s in experiments.SCHEMES))
    for Q in args.q:
        cells = {r["scheme"]: r for r in rows if r["Q_bits"] == Q}
        print(f"{Q / 1e6:9g} " + " ".join(
            f"{cells[s]['energy_J'] / 1e3:8.1f}kJ {cells[s]['time_s']:6.1f}s" for s in experiments.SCHEMES))
    print(f"total {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
