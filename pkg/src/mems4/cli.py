"""``mems4`` command-line interface.

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 validation failure.
"""

import argparse
import json
import logging
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .banded import principal_eigen_positive
from .branch import ContinuationOptions, NoFoldError, continue_branch
from .closed_form import omega_profile
from .config import COMMANDS, ConfigError, RunConfig, load_config_file, parse_sweep
from .evolution import EvolutionOptions, fold_mode, principal_mode, run
from .io import CsvTable, read_csv, write_svg
from .model import ModelParams
from .radial import assemble_A, build_grid
from .validate import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("mems4")


class SolverFailure(RuntimeError):
    pass


def _params(cfg, lam=None):
    return ModelParams(cfg.d, cfg.B, cfg.T, lam if lam is not None else (cfg.lam or 0.0), cfg.gamma)


def _continuation_options(cfg):
    return ContinuationOptions(
        newton_tol=cfg.newton_tol,
        eig_tol=cfg.eig_tol,
        ds_min=cfg.ds_min,
        ds_max=cfg.ds_max,
        lambda_stop=cfg.lambda_stop,
        eps_min=cfg.eps_min,
        fold_tol=cfg.fold_tol,
    )


def _out(cfg):
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _branch(cfg, n=None):
    return continue_branch(_params(cfg, 0.0), n=n or cfg.n, opts=_continuation_options(cfg))


# ---------------------------------------------------------------- commands


def cmd_continue(cfg):
    out = _out(cfg)
    b = _branch(cfg)
    table = CsvTable(["s", "lambda", "u_center", "mu1", "newton_iters", "cert_flags"])
    for p in b.points:
        table.rows.append([p.s, p.lam, p.min_u, p.mu1, p.newton_iters, p.certificates.flags])
    table.write(out / "branch.csv")
    om = omega_profile(cfg.d, cfg.B, cfg.T)
    r = b.grid.nodes
    end = CsvTable(["r", "u_end", "omega"], [[ri, ui, oi] for ri, ui, oi in zip(r, b.points[-1].u, om(r))])
    end.write(out / "profile_end.csv")
    write_svg(
        out / "branch.svg",
        [("stationary branch", b.lams, -b.centers)],
        title=f"Bifurcation diagram, d={cfg.d}, B={cfg.B:g}, T={cfg.T:g}",
        xlabel="lambda",
        ylabel="||u||_inf = -u(0)",
    )
    print(f"points {len(b.points)}, stop {b.stop_reason}, all certificates {b.all_accepted}")
    for f in b.folds:
        print(f"fold lambda* = {f.lam!r}, u(0) = {f.u_center!r}, mu1 = {f.mu1:.3e}, curvature = {f.curvature:.4g}")
    if b.endpoint_gap is not None:
        print(f"end-point gap ||U(s_end) - omega||_inf = {b.endpoint_gap:.4e}")
    if b.stop_reason == "stall":
        raise SolverFailure("continuation stalled; partial branch written")
    if b.fold is None:
        raise SolverFailure("no fold in computed range")
    if cfg.lambda_stop >= b.fold.lam:
        raise ConfigError(f"lambda_stop = {cfg.lambda_stop} is not below lambda* = {b.fold.lam}")
    return b


def _fold_row(n, b):
    f = b.fold
    return [n, f.lam, f.u_center, f.mu1, f.curvature, b.m1, f.s]


def cmd_lambda_star(cfg):
    out = _out(cfg)
    table = CsvTable(["n", "lambda_star", "u_center", "mu1", "curvature", "m1", "s"])
    values = []
    for n in [cfg.n] + ([cfg.refine] if cfg.refine else []):
        b = _branch(cfg, n)
        if b.fold is None:
            raise SolverFailure(f"no fold in computed range (n={n}, stop {b.stop_reason})")
        f = b.fold
        table.rows.append(_fold_row(n, b))
        values.append(f.lam)
        print(f"n = {n}: lambda* = {f.lam!r}, u(0) = {f.u_center!r}, mu1 = {f.mu1:.3e}, m1 = {b.m1!r}")
        print(f"  curvature d2 lambda/ds2 = {f.curvature:.6g} ({'negative' if f.curvature < 0 else 'NOT negative'})")
        print(f"  lambda* < m1: {f.lam < b.m1}")
    table.write(out / "fold.csv")
    if len(values) == 2:
        delta = abs(values[1] - values[0]) / abs(values[1])
        print(f"refinement delta |lambda*(n) - lambda*(refine)| / lambda* = {delta:.3e}")


def cmd_endpoint(cfg):
    out = _out(cfg)
    om = omega_profile(cfg.d, cfg.B, cfg.T)
    r = np.linspace(0.0, 1.0, 1001)
    vals = om(r)
    CsvTable(["r", "omega"], [[a, b] for a, b in zip(r, vals)]).write(out / "omega.csv")
    write_svg(
        out / "omega.svg",
        [("omega", r, vals)],
        title=f"End-point profile omega, d={cfg.d}, (B,T)=({cfg.B:g},{cfg.T:g})",
        xlabel="r",
        ylabel="omega(r)",
    )
    print(f"omega(0) = {om(0.0)!r}, omega(1) = {om(1.0)!r}, omega'(1) = {om.derivative(1.0)!r}")
    print(f"non-decreasing: {bool(np.all(np.diff(vals) >= -1e-12))}, basis {om.basis_tag}")
    if cfg.branch_file:
        prof = read_csv(cfg.branch_file)
        rr = np.array(prof.column("r"), dtype=float)
        uu = np.array(prof.column("u_end"), dtype=float)
        print(f"||U(s_end) - omega||_inf = {np.abs(uu - om(rr)).max():.4e}")


def _initial_data(cfg, opA):
    size = opA.grid.size
    if cfg.init == "zero":
        return np.zeros(size)
    if cfg.init.startswith("phi1:"):
        amp = float(cfg.init.split(":", 1)[1])
        phi = principal_eigen_positive(opA, opA.grid.weights).field
        return amp * phi / phi.max()
    table = read_csv(cfg.init)
    u = np.array(table.column(table.header[-1]), dtype=float)
    if u.shape != (size,):
        raise ConfigError(f"initial data has {u.size} values, grid needs {size}")
    return u


def cmd_evolve(cfg):
    out = _out(cfg)
    opA = assemble_A(build_grid(cfg.n, cfg.d), cfg.B, cfg.T)
    m1, phi1 = principal_mode(opA)
    lam_star = phi_star = None
    need_fold = cfg.lambda_star_factor is not None or cfg.lam is None or cfg.lam > 0
    if need_fold:
        b = continue_branch(_params(cfg, 0.0), opA=opA, opts=_continuation_options(cfg))
        if b.fold is not None:
            lam_star, phi_star = b.fold.lam, fold_mode(opA, b.fold)
    if cfg.lambda_star_factor is not None:
        if lam_star is None:
            raise SolverFailure("lambda_star_factor given but no fold found")
        lam = cfg.lambda_star_factor * lam_star
    elif cfg.lam is None:
        raise ConfigError("evolve needs --lambda or --lambda-star-factor")
    else:
        lam = cfg.lam
    params = _params(cfg, lam)
    u0 = _initial_data(cfg, opA)
    u1 = np.zeros_like(u0) if params.gamma > 0 else None
    opts = EvolutionOptions(dt0=cfg.dt0, dt_max=cfg.dt_max, eps_td=cfg.eps_td)
    tr = run(params, u0, u1, cfg.horizon, opts, opA=opA, m1=m1, phi1=phi1,
             lambda_star=lam_star, phi_star=phi_star)
    table = CsvTable(["t", "min_u", "N", "M", "E", "dt"])
    for row in zip(tr.t, tr.min_u, tr.N, tr.M, tr.E, tr.dt):
        table.rows.append(list(row))
    table.write(out / "trace.csv")
    write_svg(out / "trace.svg", [("min u", tr.t, tr.min_u), ("N", tr.t, tr.N)],
              title=f"Evolution, lambda={lam:.6g}, gamma={cfg.gamma:g}", xlabel="t", ylabel="value")
    line = f"verdict {tr.verdict}, lambda = {lam!r}, m1 = {m1!r}"
    if lam_star is not None:
        line += f", lambda* = {lam_star!r}"
    if tr.t_td:
        line += f", t_td in [{tr.t_td[0]!r}, {tr.t_td[1]!r}]"
    print(line)
    for name, bound in tr.bounds.items():
        if bound is None:
            print(f"bound {name}: not applicable")
        else:
            held = tr.bounds_respected().get(name)
            print(f"bound {name}: {bound!r}" + ("" if held is None else f", respected {held}"))
    if tr.verdict == "inconclusive":
        raise SolverFailure("time stepping stalled without touchdown signature")


def cmd_validate(cfg):
    results = run_checks(cfg)
    for name, status, detail in results:
        print(json.dumps({"check": name, "status": status, "detail": detail}))
    if any(status == "fail" for _, status, _ in results):
        return EXIT_VALIDATION
    return EXIT_OK


HANDLERS = {
    "continue": cmd_continue,
    "lambda-star": cmd_lambda_star,
    "endpoint": cmd_endpoint,
    "evolve": cmd_evolve,
    "validate": cmd_validate,
}


def execute(cfg):
    """Run one command and map failures to exit codes."""
    try:
        code = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, NoFoldError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return code if isinstance(code, int) else EXIT_OK


# ---------------------------------------------------------------- argument parsing


def build_parser():
    p = argparse.ArgumentParser(prog="mems4", description="Radial clamped MEMS equation solver.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--d", type=int)
    p.add_argument("--B", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-star-factor", dest="lambda_star_factor", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--refine", type=int, help="second grid size for lambda-star")
    p.add_argument("--horizon", type=float)
    p.add_argument("--init", help="zero, phi1:<amplitude> or a csv file")
    p.add_argument("--branch-file", dest="branch_file", help="profile_end.csv for endpoint")
    p.add_argument("--lambda-stop", dest="lambda_stop", type=float)
    p.add_argument("--eps-min", dest="eps_min", type=float)
    p.add_argument("--eps-td", dest="eps_td", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--sweep", help="key=v1,v2,...: independent runs in out/<key>=<value>")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args):
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in ("d", "B", "T", "lam", "lambda_star_factor", "gamma", "n", "refine", "horizon", "init",
                "branch_file", "lambda_stop", "eps_min", "eps_td", "seed", "output_dir"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    values["command"] = args.command
    return RunConfig(**values)


def _sweep_job(cfg_dict):
    return execute(RunConfig(**cfg_dict))


def run_sweep(cfg, sweep, workers=None):
    key, values = parse_sweep(sweep)
    if key == "command":
        raise ConfigError("cannot sweep over the command")
    jobs = [
        cfg.with_values(**{key: v, "output_dir": str(Path(cfg.output_dir) / f"{key}={v}")})
        for v in values
    ]
    # the seed only permutes the submission order; outputs are per-directory
    order = list(range(len(jobs)))
    random.Random(cfg.seed).shuffle(order)
    codes = [0] * len(jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {k: pool.submit(_sweep_job, asdict(jobs[k])) for k in order}
        for k, fut in futures.items():
            codes[k] = fut.result()
    return max(codes) if codes else EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.sweep:
            return run_sweep(cfg, args.sweep, args.workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
