"""SCA convergence of the hover planner and the joint planner on the default layout.

Writes per-iteration subproblem optimum and exact (evaluator) energy, which
shows how tight the convex restriction is at each step.

    python scripts/convergence_trace.py --q 50e6 200e6 --out results/convergence
"""
import argparse
import csv
import time
from pathlib import Path

from uavplan import fhc, joint
from uavplan.evaluator import evaluate
from uavplan.scenario import SolverSettings, default_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, nargs="+", default=[50e6, 200e6], help="per-node target, bits")
    ap.add_argument("--delta-max", type=float, default=10.0)
    ap.add_argument("--out", default="results/convergence")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    st = SolverSettings(delta_max=args.delta_max)

    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Q_bits", "planner", "iteration", "subproblem_J", "exact_J"])
        for Q in args.q:
            sc = default_scenario(Q)
            t0 = time.perf_counter()
            plan = fhc.solve_multi_gn(sc, st)
            for i, v in enumerate(plan.trace, 1):
                w.writerow([Q, "fhc", i, f"{v:.10g}", ""])
            init = joint.init_from_fhc(sc, st, plan)
            w.writerow([Q, "joint", 0, "", f"{evaluate(init, sc).total:.10g}"])
            traj, trace = joint.optimize(sc, st, "energy", init)
            for r in trace:
                w.writerow([Q, "joint", r.iteration, f"{r.subproblem:.10g}", f"{r.exact:.10g}"])
            print(f"Q={Q:.3g}: fhc {plan.E_total:.1f} J in {plan.iterations} it, "
                  f"joint {trace[-1].exact:.1f} J in {len(trace)} it, {time.perf_counter() - t0:.0f}s")
            traj.write_csv(out / f"trajectory_energy_{Q:.0f}.csv")


if __name__ == "__main__":
    main()
