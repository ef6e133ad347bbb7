"""Stationary solutions: Newton, continuation through the fold, certificates.

The discrete stationary problem is ``F(u, lam) = A_h u + lam g(u) = 0`` on the
unknowns ``u_0..u_{n-1}``.  The solution curve starts at ``(0, 0)``, rises
to a fold ``lam*`` and returns towards ``lam = 0`` with ``min u -> -1``.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .banded import EigenConvergenceError, SingularMatrixError, lu_factor, lu_solve, mu1, principal_eigen
from .closed_form import omega_profile
from .model import GUARD, DomainError, ModelParams, g, i_d
from .radial import (
    DiscreteOperator,
    assemble_A,
    assemble_A_plus_potential,
    build_grid,
    extend,
    laplacian_apply,
)

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
# multiple of eps * |A||u| below which residuals are rounding noise
FLOOR_FACTOR = 8.0
# a Newton step may remove at most this fraction of the gap 1 + u
MAX_GAP_FRACTION = 0.9


class NewtonError(RuntimeError):
    pass


class ContinuationError(RuntimeError):
    pass


class NoFoldError(ValueError):
    pass


# ---------------------------------------------------------------- Newton


def residual(u, lam, opA, rhs=None):
    """``A_h u + lam g(u)`` (minus ``rhs``) on the unknowns."""
    x = np.asarray(u, dtype=float)[: opA.n_unknowns]
    out = opA.matvec(x) + lam * g(x)
    return out if rhs is None else out - rhs


def residual_floor(opA, u, lam, rhs=None):
    """Size of the rounding error in :func:`residual` at ``u``."""
    x = np.asarray(u, dtype=float)[: opA.n_unknowns]
    scale = opA.abs_matvec(np.abs(x)) + lam * g(x)
    if rhs is not None:
        scale = scale + np.abs(rhs)
    return FLOOR_FACTOR * EPS * float(scale.max())


def _damped(x, dx):
    """Largest step ``2^-k`` keeping ``1 + x`` above a fraction of its value."""
    gap = 1.0 + x
    alpha = 1.0
    for _ in range(60):
        new = x + alpha * dx
        if np.all(new > -1.0 + GUARD) and np.all(1.0 + new >= (1.0 - MAX_GAP_FRACTION) * gap):
            return alpha
        alpha *= 0.5
    raise NewtonError("step damping underflow")


@dataclass(frozen=True)
class NewtonInfo:
    iterations: int
    residual: float
    floor: float
    damped: int


def newton_solve(u0, lam, opA, tol=1e-8, maxiter=40, rhs=None, full_output=False):
    """Damped Newton for ``A_h u + lam g(u) = rhs`` (``rhs`` defaults to 0).

    ``u0`` may be a field or a vector of unknowns; a field is returned.
    Converged when ``max|F| <= max(tol, rounding floor)``.  The step is
    halved until the iterate is admissible and keeps a tenth of its gap
    ``1 + u`` at every node.
    """
    m = opA.n_unknowns
    x = np.array(u0, dtype=float)[:m]
    if np.any(x <= -1.0 + GUARD):
        raise DomainError("initial guess not admissible")
    damped = 0
    for it in range(maxiter + 1):
        F = residual(x, lam, opA, rhs)
        res = float(np.abs(F).max())
        floor = residual_floor(opA, x, lam, rhs)
        if res <= max(tol, floor):
            u = extend(x)
            if full_output:
                return u, NewtonInfo(it, res, floor, damped)
            return u
        if it == maxiter:
            break
        J = assemble_A_plus_potential(opA, lam, x)
        dx = -lu_solve(lu_factor(J), F)
        alpha = _damped(x, dx)
        damped += alpha < 1.0
        x = x + alpha * dx
    raise NewtonError(f"no convergence in {maxiter} iterations at lam={lam}: |F|={res:.3e}")


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class Certificates:
    """Outcome of the a-priori checks on one stationary solution.

    Flags: ``bounds`` (-1 < u <= 0), ``axis_min`` (minimum at r = 0),
    ``monotone`` (non-decreasing in r), ``phi1_test`` (0 <= lam int g(u)phi1 <= m1),
    ``laplacian_sign`` (one sign change of Lap_h u on (0, 1]) and
    ``lam_below_m1``.  The recorded values are ``inv_cube`` (int (1+u)^-3,
    only when mu1 >= 0), ``i_d`` = I_d(1 + u(0)) and ``lam_i_d``.
    """

    bounds: bool
    axis_min: bool
    monotone: bool
    phi1_test: bool
    laplacian_sign: bool
    lam_below_m1: bool
    phi1_value: float
    inv_cube: float | None
    i_d: float
    lam_i_d: float

    FLAG_NAMES = ("bounds", "axis_min", "monotone", "phi1_test", "laplacian_sign", "lam_below_m1")

    @property
    def passed(self):
        return all(getattr(self, k) for k in self.FLAG_NAMES)

    @property
    def flags(self):
        """Compact string, one 0/1 per flag in :attr:`FLAG_NAMES` order."""
        return "".join("1" if getattr(self, k) else "0" for k in self.FLAG_NAMES)


def sign_changes(values, zero_tol=1e-10):
    """Sign changes of a sequence; entries below ``zero_tol * max|values|`` are skipped."""
    v = np.asarray(values, dtype=float)
    cut = zero_tol * float(np.abs(v).max()) if v.size else 0.0
    s = np.sign(v[np.abs(v) > cut])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def certify(u, lam, grid, m1, phi1, mu=None, slack=1e-8):
    """Evaluate the stationary-solution certificates for the field ``u``."""
    u = np.asarray(u, dtype=float)
    w = grid.weights
    bounds = bool(np.all(u > -1.0) and np.all(u <= slack))
    axis_min = bool(u[0] <= u.min() + slack)
    monotone = bool(np.all(np.diff(u) >= -slack))
    if bounds:
        gu = g(u)
        phi_val = lam * float(w @ (gu * phi1))
        inv_cube = float(w @ (1.0 + u) ** -3) if mu is not None and mu >= 0 else None
        z = min(1.0, 1.0 + float(u[0]))
        idv = float(i_d(z, grid.d)) if z > 0 else math.inf
    else:
        phi_val, inv_cube, idv = math.nan, None, math.nan
    phi1_test = bool(0.0 <= phi_val <= m1)
    lap = laplacian_apply(u, grid)[1:]
    if np.abs(u).max() == 0.0:
        lap_ok = True
    else:
        lap_ok = sign_changes(lap) == 1
    return Certificates(
        bounds=bounds,
        axis_min=axis_min,
        monotone=monotone,
        phi1_test=phi1_test,
        laplacian_sign=lap_ok,
        lam_below_m1=bool(lam <= m1),
        phi1_value=phi_val,
        inv_cube=inv_cube,
        i_d=idv,
        lam_i_d=lam * idv if lam > 0 else 0.0,
    )


# ---------------------------------------------------------------- branch data


@dataclass(frozen=True, eq=False)
class BranchPoint:
    s: float
    lam: float
    u: np.ndarray
    mu1: float
    newton_iters: int
    certificates: Certificates

    @property
    def min_u(self):
        return float(self.u[0])

    @property
    def accepted(self):
        return self.certificates.passed


@dataclass(frozen=True, eq=False)
class Fold:
    s: float
    lam: float
    u: np.ndarray
    mu1: float
    curvature: float
    phi_star: np.ndarray
    index: int
    fit_lam: float

    @property
    def u_center(self):
        return float(self.u[0])


@dataclass(frozen=True, eq=False)
class Branch:
    params: ModelParams
    points: list
    m1: float
    phi1: np.ndarray
    opA: DiscreteOperator = field(repr=False)
    stop_reason: str = ""
    folds: list = field(default_factory=list)
    endpoint_gap: float | None = None

    @property
    def grid(self):
        return self.opA.grid

    @property
    def fold(self):
        return self.folds[0] if self.folds else None

    @property
    def lams(self):
        return np.array([p.lam for p in self.points])

    @property
    def arclengths(self):
        return np.array([p.s for p in self.points])

    @property
    def centers(self):
        return np.array([p.min_u for p in self.points])

    @property
    def mu1s(self):
        return np.array([p.mu1 for p in self.points])

    @property
    def all_accepted(self):
        return all(p.accepted for p in self.points)


@dataclass(frozen=True)
class ContinuationOptions:
    """Step control and stopping rules of :func:`continue_branch`.

    The natural phase steps in lambda from ``dlam0`` (fraction of ``m1``)
    and hands over to pseudo-arclength once ``mu1 < switch_mu * m1``, Newton
    fails, or the lambda step falls below ``dlam_min``.
    """

    newton_tol: float = 1e-8
    eig_tol: float = 1e-9
    dlam0: float = 0.01
    dlam_min: float = 1e-6
    switch_mu: float = 0.25
    ds0: float = 0.02
    ds_min: float = 1e-6
    ds_max: float = 0.1
    grow: float = 1.3
    fast_iters: int = 3
    max_corrector: int = 12
    lambda_stop: float = 1e-3
    eps_min: float = 1e-3
    max_points: int = 20000
    fold_tol: float = 1e-3
    locate_folds: bool = True


# ---------------------------------------------------------------- continuation internals


class _Curve:
    """Discrete data shared by the predictor and corrector steps."""

    def __init__(self, opA, tol):
        self.opA = opA
        self.m = opA.n_unknowns
        self.w = opA.grid.weights[: self.m]
        self.tol = tol

    def norm(self, du, dlam):
        return math.sqrt(float(self.w @ (du * du)) + dlam * dlam)

    def bordered(self, x, lam, tu, tl):
        J = assemble_A_plus_potential(self.opA, lam, x).to_sparse()
        scale = float(np.abs(J.diagonal()).max())
        col = sp.csc_matrix(g(x).reshape(-1, 1))
        row = sp.csc_matrix((scale * self.w * tu).reshape(1, -1))
        M = sp.bmat([[J, col], [row, sp.csc_matrix([[scale * tl]])]], format="csc")
        return M, scale

    def tangent(self, x, lam, ref_u, ref_l):
        """Unit tangent, oriented to agree with the reference direction."""
        M, _ = self.bordered(x, lam, ref_u, ref_l)
        rhs = np.zeros(self.m + 1)
        rhs[-1] = 1.0
        z = spla.spsolve(M, rhs)
        tu, tl = z[:-1], z[-1]
        nrm = self.norm(tu, tl)
        return tu / nrm, tl / nrm

    def correct(self, x0, l0, tu, tl, ds, maxiter, min_iter=0):
        """Pseudo-arclength corrector from ``(x0, l0)`` along ``(tu, tl)``."""
        x = x0 + ds * tu
        lam = l0 + ds * tl
        if np.any(x <= -1.0 + GUARD):
            raise NewtonError("predictor left the admissible set")
        for it in range(maxiter + 1):
            F = residual(x, lam, self.opA)
            N = float(self.w @ (tu * (x - x0))) + tl * (lam - l0) - ds
            res = float(np.abs(F).max())
            converged = res <= max(self.tol, residual_floor(self.opA, x, lam))
            if converged and it >= min_iter and abs(N) <= 1e-10 * max(abs(ds), 1e-3):
                return x, lam, it
            if it == maxiter:
                break
            M, scale = self.bordered(x, lam, tu, tl)
            rhs = -np.append(F, scale * N)
            z = spla.spsolve(M, rhs)
            if not np.all(np.isfinite(z)):
                raise SingularMatrixError("bordered system singular")
            dx, dl = z[:-1], z[-1]
            alpha = _damped(x, dx)
            x = x + alpha * dx
            lam = lam + alpha * dl
        raise NewtonError(f"corrector failed, |F| = {res:.3e}")


class _Tracer:
    """Accepts points: eigenvalue, certificates and arclength bookkeeping."""

    def __init__(self, params, opA, opts):
        self.params = params
        self.opA = opA
        self.opts = opts
        self.grid = opA.grid
        pair = principal_eigen(opA, self.grid.weights, 0.0, tol=opts.eig_tol)
        self.m1 = pair.value
        self.phi1 = pair.field
        self.points = []
        self._mu = self.m1
        self._vec = pair.vector

    def eigen(self, x, lam):
        # default shift: lower bound of the spectrum from the potential
        try:
            pair = mu1(x, lam, self.opA, x0=self._vec, tol=self.opts.eig_tol)
        except (EigenConvergenceError, SingularMatrixError) as exc:
            log.warning("mu1 failed at lam=%.6g: %s", lam, exc)
            return math.nan, None
        self._mu, self._vec = pair.value, pair.vector
        return pair.value, pair

    def add(self, x, lam, iters):
        u = extend(x)
        if self.points:
            prev = self.points[-1]
            s = prev.s + _Curve(self.opA, 0).norm(x - prev.u[:-1], lam - prev.lam)
        else:
            s = 0.0
        mu, _ = self.eigen(x, lam)
        cert = certify(u, lam, self.grid, self.m1, self.phi1, mu)
        if not cert.passed:
            log.warning("certificate failure at lam=%.6g: %s", lam, cert.flags)
        point = BranchPoint(s, float(lam), u, mu, int(iters), cert)
        self.points.append(point)
        return point


def continue_branch(params, n=200, opts=None, opA=None):
    """Trace the stationary curve from ``(0, 0)`` through the fold.

    Natural continuation in lambda with a tangent predictor while the
    linearization is safely invertible, then pseudo-arclength with a tangent
    predictor (oriented by the secant) and bordered Newton corrector.
    Stops after the fold once
    ``lam < lambda_stop`` or ``1 + u(0) < eps_min``; a step-size underflow
    ends the run with ``stop_reason = "stall"`` and the partial branch.
    """
    opts = opts or ContinuationOptions()
    if opA is None:
        opA = assemble_A(build_grid(n, params.d), params.B, params.T)
    tracer = _Tracer(params, opA, opts)
    curve = _Curve(opA, opts.newton_tol)
    m1 = tracer.m1
    x = np.zeros(curve.m)
    lam = 0.0
    tracer.add(x, lam, 0)

    # natural phase
    dlam = opts.dlam0 * m1
    while True:
        J = assemble_A_plus_potential(opA, lam, x)
        z = -lu_solve(lu_factor(J), g(x))
        try:
            pred = x + dlam * z
            if np.any(pred <= -1.0 + GUARD):
                raise NewtonError("predictor not admissible")
            u_new, info = newton_solve(pred, lam + dlam, opA, opts.newton_tol, maxiter=8, full_output=True)
        except (NewtonError, SingularMatrixError, DomainError):
            dlam *= 0.5
            if dlam < opts.dlam_min * m1:
                break
            continue
        x, lam = u_new[:-1], lam + dlam
        point = tracer.add(x, lam, info.iterations)
        if not point.mu1 >= opts.switch_mu * m1:
            break
        if info.iterations <= opts.fast_iters:
            dlam *= opts.grow

    # pseudo-arclength phase
    if len(tracer.points) < 2:
        raise ContinuationError("natural continuation made no progress")
    ds = opts.ds0
    stop = "max_points"
    lam_max = max(p.lam for p in tracer.points)
    past_fold = False
    while len(tracer.points) < opts.max_points:
        p0, p1 = tracer.points[-2], tracer.points[-1]
        du = p1.u[:-1] - p0.u[:-1]
        dl = p1.lam - p0.lam
        nrm = curve.norm(du, dl)
        try:
            # true tangent, oriented by the secant; the secant alone lags
            # behind at sharp turns
            tu, tl = curve.tangent(p1.u[:-1], p1.lam, du / nrm, dl / nrm)
            xn, ln, it = curve.correct(p1.u[:-1], p1.lam, tu, tl, ds, opts.max_corrector)
            # reject corrections that turn back along the curve
            sec_u, sec_l = xn - p1.u[:-1], ln - p1.lam
            if float(curve.w @ (sec_u * tu)) + sec_l * tl <= 0.0:
                raise NewtonError("corrector reversed direction")
            # and corrections that jump to a distant part of the curve
            if curve.norm(sec_u - ds * tu, sec_l - ds * tl) > ds:
                raise NewtonError("corrector left the step neighbourhood")
            if ln <= 0.0:
                raise NewtonError("step crossed lam = 0")
        except (NewtonError, SingularMatrixError, DomainError) as exc:
            ds *= 0.5
            if ds < opts.ds_min:
                stop = "stall"
                log.warning("continuation stalled at lam=%.6g: %s", p1.lam, exc)
                break
            continue
        point = tracer.add(xn, ln, it)
        lam_max = max(lam_max, ln)
        past_fold = past_fold or ln < p1.lam
        if 1.0 + point.min_u < opts.eps_min:
            stop = "eps_min"
            break
        if past_fold and ln < opts.lambda_stop:
            stop = "lambda_stop"
            break
        if it <= opts.fast_iters:
            ds = min(ds * opts.grow, opts.ds_max)

    branch = Branch(params, tracer.points, m1, tracer.phi1, opA, stop_reason=stop)
    if stop in ("lambda_stop", "eps_min"):
        om = omega_profile(params.d, params.B, params.T)
        gap = float(np.abs(tracer.points[-1].u - om(opA.grid.nodes)).max())
        branch = replace(branch, endpoint_gap=gap)
    if opts.locate_folds:
        try:
            branch = replace(branch, folds=locate_folds(branch, opts))
        except NoFoldError:
            pass
    return branch


# ---------------------------------------------------------------- fold


def _fit_vertex(s, lam):
    """Vertex and second derivative of the parabola through three points."""
    a, b, _ = np.polyfit(np.asarray(s) - s[1], lam, 2)
    if a >= 0:
        return s[1], float(lam[1]), 2.0 * a
    sv = -b / (2 * a)
    return s[1] + sv, float(np.polyval(np.polyfit(np.asarray(s) - s[1], lam, 2), sv)), 2.0 * a


def _fold_indices(lams):
    idx = []
    for k in range(1, len(lams) - 1):
        if lams[k] >= lams[k - 1] and lams[k] > lams[k + 1]:
            idx.append(k)
    return idx


def locate_fold(branch, index=None, opts=None, max_refine=6):
    """Refine the turning point near ``branch.points[index]``.

    A parabola in s is fitted to lambda at three points, the solution is
    re-converged at the fitted maximizer by a pseudo-arclength step from the
    nearest point, and the fit is repeated with a shrinking stencil until
    ``|mu1| <= fold_tol * m1``.
    """
    opts = opts or ContinuationOptions()
    pts = branch.points
    if index is None:
        idx = _fold_indices([p.lam for p in pts])
        if not idx:
            raise NoFoldError("no fold in computed range")
        index = idx[0]
    opA, m1 = branch.opA, branch.m1
    curve = _Curve(opA, opts.newton_tol)
    trio = [pts[index - 1], pts[index], pts[index + 1]]
    s = np.array([p.s for p in trio])
    lam = np.array([p.lam for p in trio])
    s_fit, lam_fit, curv = _fit_vertex(s, lam)
    # base point and reference direction
    base = min(trio, key=lambda p: abs(p.s - s_fit))
    du = trio[2].u[:-1] - trio[0].u[:-1]
    dl = trio[2].lam - trio[0].lam
    nrm = curve.norm(du, dl)
    ref_u, ref_l = du / nrm, dl / nrm
    x, lcur, s_cur = base.u[:-1], base.lam, base.s
    # stencil half-width; small enough for the parabola, large enough that
    # the lambda differences stay above the residual noise
    delta = min(max(0.125 * (s[2] - s[0]), 1e-3), 0.05)
    mu_val, pair = math.nan, None
    shift = -0.5 * m1
    for _ in range(max_refine):
        tu, tl = curve.tangent(x, lcur, ref_u, ref_l)
        x, lcur, _ = curve.correct(x, lcur, tu, tl, s_fit - s_cur, opts.max_corrector, min_iter=1)
        s_cur = s_fit
        tu, tl = curve.tangent(x, lcur, ref_u, ref_l)
        pair = mu1(x, lcur, opA, shift=shift, tol=opts.eig_tol)
        mu_val = pair.value
        ls = [
            curve.correct(x, lcur, tu, tl, step, opts.max_corrector, min_iter=1)[1]
            for step in (-delta, delta)
        ]
        s_new, lam_fit, curv = _fit_vertex(
            np.array([s_cur - delta, s_cur, s_cur + delta]), np.array([ls[0], lcur, ls[1]])
        )
        # keep the vertex inside the stencil
        s_new = min(max(s_new, s_cur - delta), s_cur + delta)
        if abs(mu_val) <= opts.fold_tol * m1 and abs(s_new - s_cur) <= 0.25 * delta:
            break
        s_fit = s_new
        ref_u, ref_l = tu, tl
        delta = max(0.25 * delta, 1e-3)
    # polish: Newton steps on dlam/ds = 0 with the fitted curvature
    for _ in range(4):
        tu, tl = curve.tangent(x, lcur, ref_u, ref_l)
        step = -tl / curv if curv < 0 else 0.0
        if abs(step) <= 1e-9:
            break
        x, lcur, _ = curve.correct(x, lcur, tu, tl, step, opts.max_corrector, min_iter=1)
        s_cur += step
        ref_u, ref_l = tu, tl
    pair = mu1(x, lcur, opA, shift=shift, tol=opts.eig_tol)
    mu_val = pair.value
    phi = pair.vector if pair is not None else None
    return Fold(
        s=float(s_cur),
        lam=float(lcur),
        u=extend(x),
        mu1=float(mu_val),
        curvature=float(curv),
        phi_star=extend(phi) if phi is not None else None,
        index=int(index),
        fit_lam=float(lam_fit),
    )


def locate_folds(branch, opts=None):
    """Every turning point of lambda along the branch, in order of s."""
    idx = _fold_indices([p.lam for p in branch.points])
    if not idx:
        raise NoFoldError("no fold in computed range")
    return [locate_fold(branch, k, opts) for k in idx]


# ---------------------------------------------------------------- two solutions


def _interpolate(points, lam):
    for a, b in zip(points[:-1], points[1:]):
        if min(a.lam, b.lam) <= lam <= max(a.lam, b.lam) and a.lam != b.lam:
            t = (lam - a.lam) / (b.lam - a.lam)
            return (1 - t) * a.u + t * b.u
    return None


def two_solutions_at(lam, branch, tol=1e-8):
    """Stable and unstable solutions at ``lam`` in (0, lam*).

    Each is interpolated from the branch on its side of the fold and
    Newton-corrected at fixed ``lam``.
    """
    fold = branch.fold
    if fold is None:
        raise NoFoldError("branch has no fold")
    if not 0.0 < lam < fold.lam:
        raise ValueError(f"lam={lam} outside (0, lam*={fold.lam})")
    pts = branch.points
    k = fold.index
    guess_s = _interpolate(pts[: k + 1], lam)
    guess_u = _interpolate(pts[k:], lam)
    if guess_s is None or guess_u is None:
        raise ContinuationError(f"branch does not bracket lam={lam} on both sides of the fold")
    opA = branch.opA
    u_s = newton_solve(guess_s, lam, opA, tol)
    u_u = newton_solve(guess_u, lam, opA, tol)
    return u_s, u_u
