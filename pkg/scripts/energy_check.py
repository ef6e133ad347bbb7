"""Energy balance of the damped-inertial dynamics under step refinement.

Runs gamma = 1 below the threshold with fixed steps and reports the
cumulative defect E(t) - E(0) + dissipated energy for each step size.
"""

import argparse
from pathlib import Path

import numpy as np

from mems4.banded import principal_eigen_positive
from mems4.evolution import EvolutionOptions, run
from mems4.io import CsvTable
from mems4.model import ModelParams
from mems4.radial import assemble_A, build_grid, extend


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--horizon", type=float, default=2.0)
    ap.add_argument("--out", default="results/energy")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    opA = assemble_A(build_grid(args.n, args.d), 1.0, 0.0)
    pair = principal_eigen_positive(opA, opA.grid.weights)
    u0 = extend(0.3 * pair.vector / pair.vector.max())
    params = ModelParams(args.d, 1.0, 0.0, 0.5 * 4 * pair.value / 27, 1.0)
    table = CsvTable(["dt", "E0", "defect", "relative"])
    prev = None
    for dt in (4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3):
        opts = EvolutionOptions(dt0=dt, fixed_dt=True, newton_tol=1e-12)
        tr = run(params, u0, np.zeros_like(u0), horizon=args.horizon, opts=opts, opA=opA)
        defect = float(np.sum(np.diff(tr.E) + tr.dissipation[1:]))
        rate = "" if prev is None else f", ratio {prev / defect:.2f}"
        print(f"dt={dt:g}: E0 {tr.E[0]:.6f}, defect {defect:.3e} (relative {defect / abs(tr.E[0]):.2e}){rate}")
        table.rows.append([dt, tr.E[0], defect, defect / abs(tr.E[0])])
        prev = defect
    table.write(out / "energy.csv")


if __name__ == "__main__":
    main()
