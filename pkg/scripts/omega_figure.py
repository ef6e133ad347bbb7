"""End-point profiles omega for several tensions, and the gap of the
computed branch end to omega as lambda_stop shrinks.
"""

import argparse
from pathlib import Path

import numpy as np

from mems4.branch import ContinuationOptions, continue_branch
from mems4.closed_form import omega_profile
from mems4.io import CsvTable, write_svg
from mems4.model import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--out", default="results/omega")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    r = np.linspace(0, 1, 501)
    for d in (1, 2):
        series = [(f"T={T:g}", r, omega_profile(d, 1.0, T)(r)) for T in (0.0, 10.0, 50.0, 200.0)]
        write_svg(out / f"omega_d{d}.svg", series, title=f"End-point profiles, d={d}", xlabel="r", ylabel="omega")

    gaps = CsvTable(["d", "T", "lambda_stop", "lambda_end", "stop", "gap"])
    for d, T in ((1, 0.0), (1, 50.0), (2, 0.0), (2, 50.0)):
        for stop in (1e-1, 1e-2, 1e-3):
            opts = ContinuationOptions(lambda_stop=stop, eps_min=stop, locate_folds=False)
            b = continue_branch(ModelParams(d, 1.0, T), n=args.n, opts=opts)
            gaps.rows.append([d, T, stop, b.points[-1].lam, b.stop_reason, b.endpoint_gap])
            print(f"d={d} T={T:g} stop={stop:g}: lambda_end {b.points[-1].lam:.3e} ({b.stop_reason}), "
                  f"gap {b.endpoint_gap:.3e}")
    gaps.write(out / "endpoint_gaps.csv")


if __name__ == "__main__":
    main()
