"""Banded LU (LAPACK gbtrf/gbtrs) and shift-invert inverse iteration."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .radial import DiscreteOperator, assemble_A_plus_potential

log = logging.getLogger(__name__)


class SingularMatrixError(np.linalg.LinAlgError):
    """Pivot vanished to working precision during banded factorization."""


class EigenConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BandLU:
    factors: np.ndarray
    pivots: np.ndarray
    n: int
    lower: int
    upper: int

    @property
    def bandwidth(self):
        return self.lower + self.upper + 1


def lu_factor(op, rcond=None):
    """Factor a :class:`DiscreteOperator` with partial pivoting.

    Raises :class:`SingularMatrixError` when a pivot of U is below
    ``rcond * max|A|`` (default ``n * eps``).
    """
    kl, ku, m = op.lower, op.upper, op.n_unknowns
    ab = np.zeros((2 * kl + ku + 1, m))
    ab[kl:] = op.band
    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"dgbtrf: illegal argument {-info}")
    scale = np.abs(op.band).max() if op.band.size else 1.0
    if rcond is None:
        rcond = m * np.finfo(float).eps
    umin = np.abs(lu[kl + ku]).min()
    if info > 0 or umin <= rcond * scale:
        raise SingularMatrixError(
            f"singular banded matrix: min |u_ii| = {umin:.3e}, scale {scale:.3e}"
        )
    return BandLU(lu, piv, m, kl, ku)


def lu_solve(lu, rhs):
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != lu.n:
        raise ValueError(f"rhs length {rhs.shape[0]} != {lu.n}")
    x, info = lapack.dgbtrs(lu.factors, lu.lower, lu.upper, rhs, lu.pivots)
    if info != 0:
        raise ValueError(f"dgbtrs failed, info={info}")
    return x


def solve(op, rhs):
    return lu_solve(lu_factor(op), rhs)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue and eigenvector (unknowns u_0..u_{n-1}, weighted 1-norm 1)."""

    value: float
    vector: np.ndarray
    residual: float
    iterations: int

    @property
    def field(self):
        return np.append(self.vector, 0.0)


def _normalize(x, w):
    # weighted 1-norm 1, nonnegative at the axis
    x = x / float(w @ np.abs(x))
    if x[0] < 0:
        x = -x
    return x


def _rayleigh(op, x, w):
    ax = op.matvec(x)
    return float(w @ (x * ax)) / float(w @ (x * x)), ax


def principal_eigen(op, weights, shift=0.0, tol=1e-9, maxiter=200, x0=None):
    """Eigenvalue of ``op`` closest to ``shift`` by shift-invert iteration.

    With ``shift`` at or below the bottom of the spectrum this is the
    smallest eigenvalue.  Once the estimate settles to 1e-3 the shift jumps
    once to just below it, which makes the remaining iterations contract
    fast.  Estimates and residuals use the diagonal ``weights`` (the mass of
    the unknowns).

    Raises :class:`SingularMatrixError` if ``op - shift`` is singular (the
    caller perturbs the shift) and :class:`EigenConvergenceError` after
    ``maxiter`` iterations.
    """
    m = op.n_unknowns
    w = np.asarray(weights, dtype=float)[:m]
    x = np.ones(m) if x0 is None else np.asarray(x0, dtype=float)[:m].copy()
    x = _normalize(x, w)
    sigma = float(shift)
    lu = lu_factor(op.add_diagonal(-sigma))
    # below these floors the iterates only see roundoff of the O(h^-4) entries
    eps = np.finfo(float).eps
    theta_floor = 1e-2 * eps * np.abs(op.diagonal()).max()
    res_floor = 1e3 * eps * np.abs(op.band).sum(axis=0).max()
    theta_old = None
    moved = False
    for it in range(1, maxiter + 1):
        y = lu_solve(lu, x)
        # eigenvalue estimate from the solve, not from a matvec
        theta = sigma + float(w @ (x * x)) / float(w @ (x * y))
        x = _normalize(y, w)
        scale = max(1.0, abs(theta))
        if theta_old is not None:
            step = abs(theta - theta_old)
            if step <= max(tol * scale, theta_floor):
                res = _residual(op, x, theta, w)
                if res <= max(np.sqrt(tol) * scale, res_floor):
                    return EigenPair(theta, x, res, it)
            if not moved and step <= 1e-3 * scale and abs(theta - sigma) > 2e-2 * scale:
                # one jump of the shift just below the estimate
                try:
                    lu = lu_factor(op.add_diagonal(-(theta - 1e-2 * scale)))
                    sigma = theta - 1e-2 * scale
                except SingularMatrixError:
                    pass
                moved = True
        theta_old = theta
    raise EigenConvergenceError(
        f"inverse iteration did not converge in {maxiter} iterations (last {theta_old})"
    )


def _residual(op, x, theta, w):
    r = op.matvec(x) - theta * x
    return float(np.sqrt(w @ r**2) / np.sqrt(w @ x**2))


def principal_eigen_positive(op, weights, shift=None, tol=1e-9, maxiter=200, x0=None):
    """Smallest eigenpair, checked by the sign of the eigenvector.

    The principal eigenvector of the clamped operators is single-signed; if
    the iteration lands on a sign-changing vector the shift is lowered and
    the iteration repeated.
    """
    m = op.n_unknowns
    diag = op.diagonal()
    if shift is None:
        shift = 0.0
    w = np.asarray(weights, dtype=float)[:m]
    last = None
    for attempt in range(8):
        try:
            pair = principal_eigen(op, w, shift, tol, maxiter, x0)
        except SingularMatrixError:
            shift -= 1e-6 * max(1.0, abs(shift))
            continue
        v = pair.vector
        if np.all(v[:-1] >= -1e-10 * np.abs(v).max()):
            return pair
        last = pair
        # move the shift below the spectrum
        gap = max(abs(pair.value - shift), 1.0, 1e-3 * np.abs(diag).max())
        shift = min(shift, pair.value) - gap * 2.0**attempt
        x0 = None
    if last is None:
        raise EigenConvergenceError("no factorizable shift found")
    log.warning("principal eigenvector not single-signed (value %.6g)", last.value)
    return last


def mu1(u, lam, opA, shift=None, x0=None, tol=1e-9):
    """Smallest eigenpair of the linearization ``A_h + lam * diag(g'(u))``.

    The eigenvector is not checked for sign: with a strongly negative
    potential it develops a small negative tail next to the clamped
    boundary.  ``shift`` must lie below the lowest eigenvalue; the default
    is a lower bound from the potential.
    """
    grid = opA.grid
    op = assemble_A_plus_potential(opA, lam, u)
    if shift is None:
        # lower bound of the spectrum of A_h + diag(p) for symmetric A_h >= 0
        p = op.diagonal() - opA.diagonal()
        shift = min(0.0, float(p.min())) - 1.0
    return principal_eigen(op, grid.weights, shift=shift, tol=tol, x0=x0)


def second_eigen(op, weights, first, tol=1e-9, maxiter=500):
    """Next eigenvalue after ``first`` by deflated inverse iteration.

    The deflation projects out ``first.vector`` against its left eigenvector
    (computed from the transpose), so it stays exact for the slightly
    non-symmetric operators.
    """
    m = op.n_unknowns
    w = np.asarray(weights, dtype=float)[:m]
    # left eigenvector: A^T y = value y
    opT = DiscreteOperator(
        _transpose_band(op.band, op.lower, op.upper), op.upper, op.lower, op.kind, op.grid
    )
    left = principal_eigen(opT, w, shift=first.value - 1e-8 * max(1, abs(first.value)), tol=tol).vector
    phi = first.vector

    def project(x):
        return x - phi * (left @ x) / (left @ phi)

    lu = lu_factor(op)
    rng = np.random.default_rng(0)
    x = project(rng.standard_normal(m))
    x /= np.linalg.norm(x)
    theta_old = None
    for it in range(1, maxiter + 1):
        x = project(lu_solve(lu, x))
        x /= np.sqrt(w @ x**2)
        theta, _ = _rayleigh(op, x, w)
        if theta_old is not None and abs(theta - theta_old) <= tol * max(1.0, abs(theta)):
            return EigenPair(theta, x, 0.0, it)
        theta_old = theta
    raise EigenConvergenceError("deflated iteration did not converge")


def _transpose_band(band, lower, upper):
    m = band.shape[1]
    out = np.zeros((lower + upper + 1, m))
    # a[i, j] = band[upper + i - j, j]; a^T[j, i] stored at out[lower + j - i, i]
    for k in range(-lower, upper + 1):
        # entries with j - i = k
        src = band[upper - k]
        i = np.arange(max(0, -k), min(m, m - k))
        out[lower + k, i] = src[i + k]
    return out
