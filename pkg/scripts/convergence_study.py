"""Grid convergence of the operator, m1 and lambda* for both dimensions."""

import argparse
import math

import numpy as np

from mems4.banded import principal_eigen_positive
from mems4.branch import continue_branch
from mems4.model import ModelParams
from mems4.radial import apply_A, assemble_A, build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="50,100,200,400")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    for d, T in ((1, 0.0), (1, 50.0), (2, 0.0), (2, 50.0)):
        ops, m1s, lams = [], [], []
        for n in sizes:
            grid = build_grid(n, d)
            r = grid.nodes
            u = (1 - r**2) ** 2 * np.cos(r)
            ops.append(apply_A(u, grid, 1.0, T)[:: n // sizes[0]][:-1])
            opA = assemble_A(grid, 1.0, T)
            m1s.append(principal_eigen_positive(opA, grid.weights).value)
            lams.append(continue_branch(ModelParams(d, 1.0, T), opA=opA).fold.lam)
        print(f"d={d} T={T:g}")
        for k in range(1, len(sizes) - 1):
            ratio = lambda q: math.log2(abs(q[k] - q[k - 1]) / abs(q[k + 1] - q[k]))
            op_order = math.log2(np.abs(ops[k] - ops[k - 1]).max() / np.abs(ops[k + 1] - ops[k]).max())
            print(f"  n={sizes[k]}: operator {op_order:.2f}, m1 {ratio(m1s):.2f}, lambda* {ratio(lams):.2f}"
                  f"  (m1 {m1s[k]:.6f}, lambda* {lams[k]:.6f})")


if __name__ == "__main__":
    main()
