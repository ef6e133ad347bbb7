"""Stationary branches for d in {1, 2}, T in {0, 50}: u(0) against lambda.

Writes results/bifurcation/<case>.csv and a combined SVG per dimension,
and prints the fold data with a grid-refinement comparison.
"""

import argparse
from pathlib import Path

from mems4.branch import continue_branch
from mems4.io import CsvTable, write_svg
from mems4.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--out", default="results/bifurcation")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fold_table = CsvTable(["d", "T", "n", "lambda_star", "lambda_star_2n", "m1", "u_center", "curvature"])
    for d in (1, 2):
        series = []
        for T in (0.0, 50.0):
            b = continue_branch(ModelParams(d, 1.0, T), n=args.n)
            fine = continue_branch(ModelParams(d, 1.0, T), n=2 * args.n)
            f = b.fold
            CsvTable(["s", "lambda", "u_center", "mu1"],
                     [[p.s, p.lam, p.min_u, p.mu1] for p in b.points]).write(out / f"d{d}_T{T:g}.csv")
            fold_table.rows.append([d, T, args.n, f.lam, fine.fold.lam, b.m1, f.u_center, f.curvature])
            series.append((f"T={T:g}", b.lams / f.lam, b.centers))
            print(f"d={d} T={T:g}: lambda* = {f.lam:.6f} (2n: {fine.fold.lam:.6f}), m1 = {b.m1:.4f}, "
                  f"u*(0) = {f.u_center:.4f}, {len(b.points)} points, stop {b.stop_reason}")
        write_svg(out / f"branches_d{d}.svg", series, title=f"Stationary branches, d={d}",
                  xlabel="lambda / lambda*", ylabel="u(0)")
    fold_table.write(out / "folds.csv")


if __name__ == "__main__":
    main()
