"""Observed touchdown times against the two upper bounds over a range of lambda.

For lambda / lambda* in a sweep, zero initial data, gamma in {0, 1}:
records t_td, the bound through the principal mode (when lambda > 4 m1/27)
and the bound through the fold mode.
"""

import argparse
from pathlib import Path

import numpy as np

from mems4.branch import continue_branch
from mems4.evolution import fold_mode, principal_mode, run
from mems4.io import CsvTable, write_svg
from mems4.model import ModelParams
from mems4.radial import assemble_A, build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--T", type=float, default=0.0)
    ap.add_argument("--n", type=int, default=150)
    ap.add_argument("--out", default="results/touchdown")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    opA = assemble_A(build_grid(args.n, args.d), 1.0, args.T)
    b = continue_branch(ModelParams(args.d, 1.0, args.T), opA=opA)
    lam_star, phi_star = b.fold.lam, fold_mode(opA, b.fold)
    m1, phi1 = principal_mode(opA)
    table = CsvTable(["gamma", "ratio", "lambda", "t_td", "bound_general", "bound_sharp"])
    series = []
    for gamma in (0.0, 1.0):
        ts, sharp = [], []
        ratios = np.array([1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0])
        for ratio in ratios:
            p = ModelParams(args.d, 1.0, args.T, ratio * lam_star, gamma)
            zero = np.zeros(opA.grid.size)
            tr = run(p, zero, zero if gamma else None, horizon=100.0, opA=opA, m1=m1, phi1=phi1,
                     lambda_star=lam_star, phi_star=phi_star)
            td = tr.t_td[1] if tr.t_td else float("nan")
            table.rows.append([gamma, ratio, p.lam, td, tr.bounds["general"] or float("nan"), tr.bounds["sharp"]])
            ts.append(td)
            sharp.append(tr.bounds["sharp"])
            print(f"gamma={gamma:g} lambda/lambda*={ratio:.2f}: {tr.verdict}, t_td {td:.4f}, "
                  f"bounds {tr.bounds}")
        series += [(f"t_td gamma={gamma:g}", ratios, np.log10(ts)), (f"sharp bound gamma={gamma:g}", ratios, np.log10(sharp))]
    table.write(out / "touchdown.csv")
    write_svg(out / "touchdown.svg", series, title="Touchdown time and the fold-mode bound",
              xlabel="lambda / lambda*", ylabel="log10 t")


if __name__ == "__main__":
    main()
