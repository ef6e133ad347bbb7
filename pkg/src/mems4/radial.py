"""Uniform radial grid, ball quadrature and the banded clamped operators.

Fields are numpy arrays of nodal values ``u[0..n]`` on ``r_i = i / n``; the
clamped boundary value ``u[n] = 0`` is stored explicitly.  Unknown vectors
handed to the solvers hold only ``u[0..n-1]``.

The radial Laplacian ``L_h`` uses the central stencil off the axis and the
reflection ghost ``u[n+1] = u[n-1]`` for the zero normal derivative at
``r = 1``.  The clamped operator is the composition
``A_h = B L_h L_h - T L_h`` restricted to the unknowns.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import g_prime

BALL_MEASURE = {1: 2.0, 2: np.pi}
SPHERE_FACTOR = {1: 2.0, 2: 2.0 * np.pi}


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    d: int
    h: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.n + 1


def build_grid(n, d):
    """Uniform grid on [0, 1] with ball quadrature weights.

    d = 2 uses the exact area of the annulus cell ``[r_i - h/2, r_i + h/2]``
    clipped to [0, 1]; d = 1 uses the trapezoidal rule doubled for the
    symmetric interval (-1, 1).  Both sum to the ball measure.
    """
    n = int(n)
    if n < 8:
        raise ValueError(f"need n >= 8 intervals, got {n}")
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    h = 1.0 / n
    r = np.arange(n + 1) * h
    lo = np.clip(r - h / 2, 0.0, 1.0)
    hi = np.clip(r + h / 2, 0.0, 1.0)
    w = SPHERE_FACTOR[d] * (hi**d - lo**d) / d
    return RadialGrid(n=n, d=d, h=h, nodes=r, weights=w)


def _check_field(u, grid):
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"field has shape {u.shape}, grid expects ({grid.size},)")
    return u


def extend(x):
    """Append the clamped boundary value to a vector of unknowns."""
    return np.append(np.asarray(x, dtype=float), 0.0)


def weighted_integral(f, grid):
    return float(grid.weights @ _check_field(f, grid))


def l2_norm(f, grid):
    f = _check_field(f, grid)
    return float(np.sqrt(grid.weights @ (f * f)))


def _axis_row(d, h):
    # d = 1: symmetric ghost, d * u''(0) ~ 2 (u1 - u0) / h^2.
    # d = 2: combination of u1, u2 whose O(h^2) error matches the limit of
    # the off-axis stencil error, so L_h L_h stays second order at r = 0.
    if d == 1:
        return {0: -2.0 / h**2, 1: 2.0 / h**2}
    return {0: -21.0 / (6 * h**2), 1: 20.0 / (6 * h**2), 2: 1.0 / (6 * h**2)}


def laplacian_apply(u, grid):
    """Radial Laplacian of a clamped field at every node, ghost closure at r = 1."""
    u = _check_field(u, grid)
    n, h, d, r = grid.n, grid.h, grid.d, grid.nodes
    ug = np.concatenate([u, [u[n - 1]]])
    out = np.empty(n + 1)
    i = np.arange(1, n + 1)
    out[1:] = (ug[i + 1] - 2 * ug[i] + ug[i - 1]) / h**2 + (d - 1) / r[i] * (
        ug[i + 1] - ug[i - 1]
    ) / (2 * h)
    out[0] = sum(c * u[k] for k, c in _axis_row(d, h).items())
    return out


def laplacian_matrix(grid):
    """Sparse (n+1) x (n+1) matrix of :func:`laplacian_apply`."""
    n, h, d, r = grid.n, grid.h, grid.d, grid.nodes
    rows, cols, vals = [], [], []
    for k, c in _axis_row(d, h).items():
        rows.append(0)
        cols.append(k)
        vals.append(c)
    for i in range(1, n + 1):
        up = 1 / h**2 + (d - 1) / (2 * h * r[i])
        dn = 1 / h**2 - (d - 1) / (2 * h * r[i])
        rows += [i, i, i]
        cols += [i - 1, i, i + 1 if i < n else n - 1]
        vals += [dn, -2 / h**2, up]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Square banded matrix in LAPACK ``ab`` layout: ``band[upper + i - j, j] = a[i, j]``."""

    band: np.ndarray
    lower: int
    upper: int
    kind: str
    grid: RadialGrid = field(repr=False)

    @property
    def n_unknowns(self):
        return self.band.shape[1]

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        m = self.n_unknowns
        y = np.zeros(m)
        for k in range(-self.lower, self.upper + 1):
            # k = j - i
            diag = self.band[self.upper - k]
            if k >= 0:
                y[: m - k] += diag[k:] * x[k:]
            else:
                y[-k:] += diag[: m + k] * x[: m + k]
        return y

    __matmul__ = matvec

    def abs_matvec(self, x):
        """``|A| x``; bounds the rounding error of :meth:`matvec`."""
        return DiscreteOperator(
            np.abs(self.band), self.lower, self.upper, self.kind, self.grid
        ).matvec(x)

    def diagonal(self):
        return self.band[self.upper].copy()

    def add_diagonal(self, values, kind=None):
        band = self.band.copy()
        band[self.upper] += values
        return DiscreteOperator(band, self.lower, self.upper, kind or self.kind, self.grid)

    def scaled(self, c):
        return DiscreteOperator(c * self.band, self.lower, self.upper, self.kind, self.grid)

    def to_dense(self):
        m = self.n_unknowns
        a = np.zeros((m, m))
        for k in range(-self.lower, self.upper + 1):
            diag = self.band[self.upper - k]
            idx = np.arange(max(0, -k), min(m, m - k))
            a[idx, idx + k] = diag[idx + k]
        return a

    def to_sparse(self):
        offsets = list(range(-self.lower, self.upper + 1))
        m = self.n_unknowns
        data = [self.band[self.upper - k] for k in offsets]
        # dia_matrix stores data[k][j] for column j, same convention as band
        return sp.dia_matrix((np.array(data), offsets), shape=(m, m)).tocsc()


def _to_operator(mat, kind, grid):
    mat = sp.csr_matrix(mat)
    mat.eliminate_zeros()
    coo = mat.tocoo()
    off = coo.col - coo.row
    lower = int(max(0, -off.min())) if off.size else 0
    upper = int(max(0, off.max())) if off.size else 0
    m = mat.shape[0]
    band = np.zeros((lower + upper + 1, m))
    band[upper + coo.row - coo.col, coo.col] = coo.data
    return DiscreteOperator(band, lower, upper, kind, grid)


def laplacian_operator(grid):
    """``L_h`` on the unknowns (u_n = 0 eliminated)."""
    n = grid.n
    return _to_operator(laplacian_matrix(grid)[:n, :n], "laplacian", grid)


def assemble_A(grid, B, T):
    """Banded ``A_h = B L_h L_h - T L_h`` on the unknowns u_0..u_{n-1}."""
    if not B > 0 or not T >= 0:
        raise ValueError(f"need B > 0 and T >= 0, got B={B}, T={T}")
    n = grid.n
    L = laplacian_matrix(grid)
    full = B * (L @ L) - T * L
    return _to_operator(full[:n, :n], "A", grid)


def apply_A(u, grid, B, T):
    """Action of ``A_h`` on a clamped field by composing the stencils (rows 0..n-1).

    Same operator as :func:`assemble_A`; avoids the roundoff of summing the
    O(h^-4) matrix entries.
    """
    Lu = laplacian_apply(u, grid)
    return (B * laplacian_apply(Lu, grid) - T * Lu)[: grid.n]


def assemble_A_plus_potential(opA, lam, u):
    """``A_h + lam * diag(g'(u))``; ``u`` may be a field or the unknowns."""
    u = np.asarray(u, dtype=float)[: opA.n_unknowns]
    if lam == 0:
        return opA
    return opA.add_diagonal(lam * g_prime(u), kind="A_plus_potential")


def inner_h2(u, v, grid, B, T):
    """Discrete ``int B (Lap u)(Lap v) + T u' v' dx`` over the ball.

    The Laplacian part uses nodal products against the grid weights; the
    gradient part uses the central difference at cell midpoints, weighted by
    the exact shell measure ``c_d r_{i+1/2}^{d-1} h``.
    """
    u = _check_field(u, grid)
    v = _check_field(v, grid)
    w = grid.weights
    out = B * float(w @ (laplacian_apply(u, grid) * laplacian_apply(v, grid)))
    if T:
        h, d = grid.h, grid.d
        mid = grid.nodes[:-1] + h / 2
        shell = SPHERE_FACTOR[d] * mid ** (d - 1) * h
        out += T * float(shell @ (np.diff(u) / h * np.diff(v) / h))
    return out


def weighted_dot(x, y, grid):
    """Weighted dot of two vectors of unknowns (boundary node contributes 0)."""
    m = len(x)
    return float(np.sum(grid.weights[:m] * x * y))
