"""Invariant checks behind ``mems4 validate``.

Each check returns ``(status, detail)`` with status ``pass``, ``fail`` or
``skipped``.  Grid-convergence checks need ``n >= MIN_CONVERGENCE_N``.
"""

import math

import numpy as np

from . import model
from .banded import lu_solve, lu_factor, mu1, principal_eigen_positive, second_eigen
from .branch import ContinuationOptions, continue_branch, newton_solve
from .closed_form import bessel_i0_i1_k0_k1, omega_profile
from .io import CsvTable, parse_csv
from .model import ModelParams
from .radial import BALL_MEASURE, apply_A, assemble_A, build_grid, extend

MIN_CONVERGENCE_N = 64


def _status(ok, detail):
    return ("pass" if ok else "fail"), detail


def check_nonlinearity(cfg):
    xs = np.linspace(-0.9, 3.0, 200)
    h = 1e-5
    fd1 = (model.g(xs + h) - model.g(xs - h)) / (2 * h)
    fd2 = (model.g_prime(xs + h) - model.g_prime(xs - h)) / (2 * h)
    err = max(np.abs(fd1 / model.g_prime(xs) - 1).max(), np.abs(fd2 / model.g_second(xs) - 1).max())
    return _status(err < 1e-6, f"relative derivative error {err:.2e}")


def check_chi_minimum(cfg):
    lam = 2 * 4 / 27
    z = np.linspace(-0.99, 10, 200001)
    vals = model.chi(z, 1.0, lam)
    ok = vals.min() >= model.chi_min(1.0, lam) - 1e-12
    zmin = z[np.argmin(vals)]
    return _status(ok and abs(zmin - model.z_lambda(1.0, lam)) < 1e-3, f"argmin {zmin:.5f}")


def check_quadrature(cfg):
    errs = []
    for d in (1, 2):
        grid = build_grid(cfg.n, d)
        errs.append(abs(grid.weights.sum() / BALL_MEASURE[d] - 1))
    return _status(max(errs) < 1e-12, f"max relative mass error {max(errs):.1e}")


def check_operator_order(cfg):
    n = cfg.n
    if n < MIN_CONVERGENCE_N:
        return "skipped", f"n={n} below {MIN_CONVERGENCE_N}"
    orders = []
    for d, T in ((1, 1.0), (2, 50.0)):
        errs = []
        for m in (n, 2 * n):
            grid = build_grid(m, d)
            r = grid.nodes
            u = (1 - r**2) ** 2
            exact = (24.0 - T * (12 * r**2 - 4)) if d == 1 else (64.0 - T * (16 * r**2 - 8))
            errs.append(np.abs(apply_A(u, grid, 1.0, T) - exact[:-1])[:-1].max())
        orders.append(math.log2(errs[0] / errs[1]))
    return _status(min(orders) >= 1.9, "orders " + ", ".join(f"{o:.3f}" for o in orders))


def check_solver(cfg):
    opA = assemble_A(build_grid(max(cfg.n, 16), cfg.d), cfg.B, cfg.T)
    rhs = np.linspace(1.0, 2.0, opA.n_unknowns)
    x = lu_solve(lu_factor(opA), rhs)
    rel = np.abs(opA.matvec(x) - rhs).max() / np.abs(opA.abs_matvec(np.abs(x))).max()
    return _status(rel < 1e-12, f"scaled residual {rel:.1e}")


def check_principal(cfg):
    n = cfg.n
    if n < MIN_CONVERGENCE_N:
        return "skipped", f"n={n} below {MIN_CONVERGENCE_N}"
    opA = assemble_A(build_grid(n, 1), 1.0, 0.0)
    pair = principal_eigen_positive(opA, opA.grid.weights)
    k = 4.730040744862704  # first positive root of cos k cosh k = 1
    rel = abs(pair.value / (k / 2) ** 4 - 1)
    single = bool(np.all(pair.vector > 0))
    return _status(rel < 1e-2 and single, f"m1 {pair.value:.6f}, rel {rel:.1e}")


def check_mu1_shift(cfg):
    opA = assemble_A(build_grid(max(cfg.n, 16), cfg.d), cfg.B, cfg.T)
    w = opA.grid.weights
    lam = 0.1
    m1 = principal_eigen_positive(opA, w).value
    shifted = principal_eigen_positive(opA.add_diagonal(-2.0 * lam), w).value
    got = mu1(np.zeros(opA.n_unknowns), lam, opA, shift=-2 * lam - 1).value
    ok = abs(got - shifted) <= 1e-6 * m1 and abs(got - (m1 - 2 * lam)) <= 1e-6 * m1
    return _status(ok, f"mu1 {got:.8f}, m1 - 2 lam {m1 - 2 * lam:.8f}")


def check_simple(cfg):
    opA = assemble_A(build_grid(max(cfg.n, 16), cfg.d), cfg.B, cfg.T)
    w = opA.grid.weights
    first = principal_eigen_positive(opA, w)
    second = second_eigen(opA, w, first)
    return _status(second.value > first.value * (1 + 1e-6), f"{first.value:.4f} < {second.value:.4f}")


def check_bessel(cfg):
    worst = 0.0
    for x in np.linspace(0.05, 60.0, 400):
        i0, i1, k0, k1 = bessel_i0_i1_k0_k1(x)
        worst = max(worst, abs(x * (i0 * k1 + i1 * k0) - 1.0))
    return _status(worst < 1e-10, f"max Wronskian defect {worst:.1e}")


def check_omega(cfg):
    om = omega_profile(cfg.d, cfg.B, cfg.T)
    r = np.linspace(0, 1, 1001)
    vals = om(r)
    ok = (
        abs(om(0.0) + 1) < 1e-10
        and abs(om(1.0)) < 1e-10
        and abs(om.derivative(1.0)) < 1e-10
        and np.all(vals[1:] > -1)
        and np.all(np.diff(vals) >= -1e-12)
    )
    return _status(ok, f"omega(1/2) = {om(0.5):.6f}")


def check_linear_response(cfg):
    n = cfg.n
    if n < MIN_CONVERGENCE_N:
        return "skipped", f"n={n} below {MIN_CONVERGENCE_N}"
    lam = 1e-2
    errs = []
    for d, c in ((1, 24.0), (2, 64.0)):
        opA = assemble_A(build_grid(n, d), 1.0, 0.0)
        u = newton_solve(np.zeros(opA.n_unknowns), lam, opA)
        errs.append(abs(u[0] / (-lam / c) - 1))
    return _status(max(errs) < 0.05, "relative errors " + ", ".join(f"{e:.2e}" for e in errs))


def check_fold(cfg):
    n = cfg.n
    if n < MIN_CONVERGENCE_N:
        return "skipped", f"n={n} below {MIN_CONVERGENCE_N}"
    b = continue_branch(ModelParams(cfg.d, cfg.B, cfg.T), n=n, opts=ContinuationOptions())
    f = b.fold
    if f is None:
        return "fail", f"no fold ({b.stop_reason})"
    ok = f.lam < b.m1 and abs(f.mu1) <= cfg.fold_tol * b.m1 and f.curvature < 0 and b.all_accepted
    return _status(ok, f"lam* {f.lam:.6f}, mu1 {f.mu1:.2e}, curvature {f.curvature:.3g}")


def check_csv_roundtrip(cfg):
    rng = np.random.default_rng(cfg.seed)
    rows = [[int(i), *rng.standard_normal(3) * 10.0 ** rng.integers(-20, 20, 3)] for i in range(50)]
    table = CsvTable(["k", "a", "b", "c"], rows)
    back = parse_csv(table.render())
    return _status(back.rows == rows and back.header == table.header, f"{len(rows)} rows")


CHECKS = {
    "nonlinearity_derivatives": check_nonlinearity,
    "chi_minimum": check_chi_minimum,
    "quadrature_mass": check_quadrature,
    "operator_convergence": check_operator_order,
    "banded_solve": check_solver,
    "principal_eigenvalue": check_principal,
    "mu1_constant_potential": check_mu1_shift,
    "simple_principal_eigenvalue": check_simple,
    "bessel_wronskian": check_bessel,
    "omega_profile": check_omega,
    "linear_response": check_linear_response,
    "fold_structure": check_fold,
    "csv_roundtrip": check_csv_roundtrip,
}


def run_checks(cfg):
    results = []
    for name, check in CHECKS.items():
        try:
            status, detail = check(cfg)
        except Exception as exc:  # a crashing check is a failed check
            status, detail = "fail", f"{type(exc).__name__}: {exc}"
        results.append((name, status, detail))
    return results
