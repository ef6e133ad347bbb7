"""Parabolic and damped-hyperbolic dynamics, touchdown detection and bounds.

    gamma^2 u_tt + u_t + A_h u = -lam g(u),   gamma >= 0.

gamma = 0 is stepped by implicit Euler, gamma > 0 by the implicit midpoint
rule on (u, v = u_t).  Both solve one damped Newton problem per step with the
banded operator ``A_h + c I``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .banded import _transpose_band, lu_factor, lu_solve, principal_eigen_positive
from .branch import NewtonError, newton_solve
from .model import DomainError, chi_min, g
from .radial import DiscreteOperator, assemble_A, assemble_A_plus_potential, build_grid, extend

log = logging.getLogger(__name__)


class BoundNotApplicable(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    u: np.ndarray
    v: np.ndarray | None = None
    dt: float = 1e-3

    @property
    def min_u(self):
        return float(self.u.min())


@dataclass(frozen=True)
class EvolutionOptions:
    """Time-step control.

    ``max_drop`` caps the decrease of ``min u`` per step as a fraction of
    the gap ``1 + min u``; ``fixed_dt`` disables adaptivity (Richardson
    studies).  Touchdown is declared once ``1 + min u <= eps_td``.
    """

    dt0: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.05
    max_drop: float = 0.1
    grow: float = 1.5
    eps_td: float = 1e-3
    newton_tol: float = 1e-9
    fixed_dt: bool = False
    max_steps: int = 200000


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Sampled run: arrays of t, min u, N, M, E, dt and the dissipated energy.

    ``dissipation[k]`` is ``dt * ||v||^2`` over step k (zero for the first
    sample), the amount the energy identity removes.
    """

    t: np.ndarray
    min_u: np.ndarray
    N: np.ndarray
    M: np.ndarray
    E: np.ndarray
    dt: np.ndarray
    dissipation: np.ndarray
    verdict: str
    t_td: tuple | None
    bounds: dict
    final: EvolutionState

    @property
    def touched_down(self):
        return self.verdict == "touched_down"

    def bounds_respected(self):
        """Observed upper end of the touchdown bracket against each bound."""
        if not self.touched_down:
            return {}
        return {k: self.t_td[1] <= b for k, b in self.bounds.items() if b is not None}


# ---------------------------------------------------------------- test functions


def adjoint_weight(op, value, weights):
    """Normalized ``psi`` with ``sum_j w_j psi_j (op x)_j = value * sum_j w_j psi_j x_j``.

    ``psi = W^-1 y`` for the left eigenvector ``y`` of ``op`` at ``value``.
    Testing the discrete equation against ``psi`` reproduces the continuous
    eigenfunction identity exactly even though ``W op`` is not symmetric.
    Scaled to ``sum w psi = 1`` (positive on the principal mode).
    """
    m = op.n_unknowns
    w = np.asarray(weights, dtype=float)[:m]
    opT = DiscreteOperator(_transpose_band(op.band, op.lower, op.upper), op.upper, op.lower, op.kind, op.grid)
    # inverse iteration on op^T just below value
    lu = lu_factor(opT.add_diagonal(-(value - 1e-6 * max(1.0, abs(value)))))
    y = np.ones(m)
    for _ in range(50):
        y_new = lu_solve(lu, y)
        y_new /= np.abs(y_new).max()
        if np.abs(y_new - y).max() < 1e-14:
            y = y_new
            break
        y = y_new
    psi = y / w
    psi /= float(w @ psi)
    return extend(psi)


def functionals(state, phi1, phi_star, params, opA):
    """``(N, M, E)`` at ``state``.

    ``N = int phi1 u``, ``M = int phi_star u`` (nan without ``phi_star``) and
    ``E = gamma^2/2 ||v||^2 + 1/2 <u, A_h u> - lam int (1+u)^-1``, with the
    kinetic part absent for gamma = 0.
    """
    grid = opA.grid
    w = grid.weights
    u = state.u
    x = u[:-1]
    N = float(w @ (phi1 * u))
    M = float(w @ (phi_star * u)) if phi_star is not None else math.nan
    E = 0.5 * float(w[:-1] @ (x * opA.matvec(x))) - params.lam * float(w @ (1.0 / (1.0 + u)))
    if params.gamma > 0 and state.v is not None:
        E += 0.5 * params.gamma**2 * float(w @ state.v**2)
    return N, M, E


# ---------------------------------------------------------------- bounds


def touchdown_bound_general(params, m1, N0, dN0=0.0):
    """Upper bound on the touchdown time from the principal mode, lam > 4 m1 / 27."""
    lam = params.lam
    if not lam > 4.0 * m1 / 27.0:
        raise BoundNotApplicable(f"needs lam > 4 m1 / 27 = {4 * m1 / 27:.6g}, got {lam}")
    c = chi_min(m1, lam)
    return (1.0 + N0 + params.gamma**2 * (abs(dN0) + c)) / c


def touchdown_bound_sharp(params, lambda_star, M0, dM0=0.0):
    """Upper bound on the touchdown time from the fold mode, lam > lam*."""
    lam = params.lam
    if not lam > lambda_star:
        raise BoundNotApplicable(f"needs lam > lam* = {lambda_star:.6g}, got {lam}")
    gam2 = params.gamma**2
    k0 = M0 + gam2 * abs(dM0)
    gk0 = g(k0)
    k1 = M0 + gam2 * abs(dM0 + (lam - lambda_star) * gk0)
    return (1.0 + k1) / ((lam - lambda_star) * gk0)


# ---------------------------------------------------------------- steppers


def step_parabolic(state, params, opA, dt=None, tol=1e-9):
    """Implicit Euler: ``(I/dt + A_h) u+ + lam g(u+) = u / dt``."""
    dt = state.dt if dt is None else dt
    x = state.u[:-1]
    op = opA.add_diagonal(1.0 / dt)
    u_new = newton_solve(x, params.lam, op, tol, rhs=x / dt)
    return EvolutionState(state.t + dt, u_new, None, dt)


def step_hyperbolic(state, params, opA, dt=None, tol=1e-9):
    """Implicit midpoint on ``gamma^2 v' + v + A_h u = -lam g(u)``, ``u' = v``.

    Solved for the midpoint ``m = (u + u+)/2``:
    ``(4 gamma^2/dt^2 + 2/dt) m + A_h m + lam g(m) = (4 gamma^2/dt^2 + 2/dt) u + 2 gamma^2 v / dt``.
    """
    dt = state.dt if dt is None else dt
    gam2 = params.gamma**2
    x, vx = state.u[:-1], state.v[:-1]
    c = 4.0 * gam2 / dt**2 + 2.0 / dt
    op = opA.add_diagonal(c)
    m = newton_solve(x, params.lam, op, tol, rhs=c * x + 2.0 * gam2 * vx / dt)[:-1]
    u_new = 2.0 * m - x
    v_new = 4.0 * (m - x) / dt - vx
    return EvolutionState(state.t + dt, extend(u_new), extend(v_new), dt)


# ---------------------------------------------------------------- driver


def principal_mode(opA):
    """``(m1, phi1)`` of ``A_h`` with ``phi1`` the adjoint-consistent test function.

    For initial data use the eigenvector itself
    (:func:`mems4.banded.principal_eigen_positive`); the adjoint test
    function is only smooth away from the axis node when d = 2.
    """
    pair = principal_eigen_positive(opA, opA.grid.weights)
    return pair.value, adjoint_weight(opA, pair.value, opA.grid.weights)


def fold_mode(opA, fold):
    """Adjoint-consistent test function of the fold linearization."""
    J = assemble_A_plus_potential(opA, fold.lam, fold.u)
    return adjoint_weight(J, fold.mu1, opA.grid.weights)


def run(params, u0, u1=None, horizon=1.0, opts=None, opA=None, n=200, m1=None, phi1=None,
        lambda_star=None, phi_star=None):
    """Integrate to ``horizon`` or touchdown and collect the trace.

    ``phi1``/``phi_star`` are the test functions for N and M (computed from
    ``opA`` when ``phi1`` is absent; M is skipped without ``phi_star``).
    The applicable touchdown bounds are attached to the trace.
    """
    opts = opts or EvolutionOptions()
    if opA is None:
        opA = assemble_A(build_grid(n, params.d), params.B, params.T)
    grid = opA.grid
    hyper = params.gamma > 0
    if hyper != (u1 is not None):
        raise ValueError("initial velocity u1 must be given exactly when gamma > 0")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.size,) or u0[-1] != 0.0:
        raise ValueError("u0 must be a field with the clamped value u[n] = 0")
    if np.any(u0 <= -1.0):
        raise DomainError("u0 not admissible")
    if hyper:
        u1 = np.asarray(u1, dtype=float)
        if u1.shape != (grid.size,) or u1[-1] != 0.0:
            raise ValueError("u1 must be a field with u1[n] = 0")
    if phi1 is None or m1 is None:
        m1, phi1 = principal_mode(opA)
    w = grid.weights

    bounds = {}
    N0 = float(w @ (phi1 * u0))
    dN0 = float(w @ (phi1 * u1)) if hyper else 0.0
    try:
        bounds["general"] = touchdown_bound_general(params, m1, N0, dN0)
    except BoundNotApplicable:
        bounds["general"] = None
    if lambda_star is not None and phi_star is not None:
        M0 = float(w @ (phi_star * u0))
        dM0 = float(w @ (phi_star * u1)) if hyper else 0.0
        try:
            bounds["sharp"] = touchdown_bound_sharp(params, lambda_star, M0, dM0)
        except BoundNotApplicable:
            bounds["sharp"] = None

    step = step_hyperbolic if hyper else step_parabolic
    state = EvolutionState(0.0, u0.copy(), u1.copy() if hyper else None, opts.dt0)
    rows = [(0.0, state.min_u, *functionals(state, phi1, phi_star, params, opA), 0.0, 0.0)]
    verdict, t_td = "survived", None
    dt = opts.dt0
    for _ in range(opts.max_steps):
        if state.t >= horizon * (1 - 1e-14):
            break
        dt = min(dt, horizon - state.t)
        gap = 1.0 + state.min_u
        try:
            new = step(state, params, opA, dt, opts.newton_tol)
            ok = opts.fixed_dt or state.min_u - new.min_u <= opts.max_drop * gap
        except (NewtonError, DomainError, np.linalg.LinAlgError):
            new, ok = None, False
        if not ok:
            if opts.fixed_dt and new is None:
                raise NewtonError(f"fixed step {dt} failed at t={state.t}")
            dt *= 0.5
            if dt < opts.dt_min:
                if gap <= 10 * opts.eps_td:
                    verdict, t_td = "touched_down", (state.t, state.t + 2 * dt)
                else:
                    verdict = "inconclusive"
                break
            continue
        vel = (new.u - state.u) / dt
        diss = dt * float(w @ vel**2)
        drop = state.min_u - new.min_u
        state = new
        rows.append((state.t, state.min_u, *functionals(state, phi1, phi_star, params, opA), dt, diss))
        if 1.0 + state.min_u <= opts.eps_td:
            verdict, t_td = "touched_down", (rows[-2][0], state.t)
            break
        if not opts.fixed_dt and drop <= 0.25 * opts.max_drop * gap:
            dt = min(dt * opts.grow, opts.dt_max)
    else:
        verdict = "inconclusive"
    arr = np.array(rows)
    return EvolutionTrace(
        t=arr[:, 0], min_u=arr[:, 1], N=arr[:, 2], M=arr[:, 3], E=arr[:, 4],
        dt=arr[:, 5], dissipation=arr[:, 6], verdict=verdict, t_td=t_td,
        bounds=bounds, final=state,
    )
