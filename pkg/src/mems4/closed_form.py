"""End-point profile omega, modified Bessel functions and the linear response.

omega solves ``B Lap^2 w - T Lap w = 0`` on the punctured ball with
``w(0) = -1``, bounded gradient at the origin and clamped data at r = 1.
Radially this is a four-dimensional homogeneous ODE; the profile is a
combination of four basis functions fixed by four rows: two at r = 1, the
value at r = 0 and one regularity row at r = 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from .banded import solve
from .radial import assemble_A, extend

EULER_GAMMA = 0.57721566490153286061

# I by power series up to here, scaled asymptotic series beyond
I_SERIES_MAX = 30.0
# K by log-series up to here, trapezoidal rule on exp(-x cosh t) beyond
K_SERIES_MAX = 2.0
# below this mu = sqrt(T/B) the hyperbolic/Bessel pairs are nearly dependent;
# use rescaled combinations that tend to the T = 0 basis instead
SCALED_MU_MAX = 1.0


def _small_series(x):
    """Power-series pieces at x > 0.

    Returns I0, I1 and the regular remainders
    ``k0r = K0 + ln(x/2) I0`` and ``k1r = K1 - 1/x - ln(x/2) I1``.
    """
    q = 0.25 * x * x
    term = 1.0  # q^k / (k!)^2
    harmonic = 0.0  # H_k
    i0 = i1 = k0r = k1r = 0.0
    k = 0
    while True:
        term1 = term / (k + 1)  # q^k / (k! (k+1)!)
        i0 += term
        i1 += term1
        k0r += harmonic * term
        # psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        k1r += (2 * harmonic + 1.0 / (k + 1) - 2 * EULER_GAMMA) * term1
        k += 1
        harmonic += 1.0 / k
        term *= q / (k * k)
        if term < 1e-17 * i0 and k > 2:
            break
    i1 *= 0.5 * x
    k0r -= EULER_GAMMA * i0
    k1r *= -0.25 * x
    return i0, i1, k0r, k1r


def _i_asymptotic(x, nu):
    mu = 4.0 * nu * nu
    total = term = 1.0
    k = 1
    while True:
        new = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(new) >= abs(term) or abs(new) < 1e-17 * abs(total):
            break
        total += new
        term = new
        k += 1
    return math.exp(x) / math.sqrt(2 * math.pi * x) * total


def _k_quadrature(x, nu, step=0.1):
    tmax = math.acosh(1.0 + 50.0 / x)
    t = np.arange(0.0, tmax + step, step)
    f = np.exp(-x * np.cosh(t)) * np.cosh(nu * t)
    return step * (f.sum() - 0.5 * f[0])


def bessel_i0_i1(x):
    if x == 0.0:
        return 1.0, 0.0
    if x <= I_SERIES_MAX:
        return _small_series(x)[:2]
    return _i_asymptotic(x, 0), _i_asymptotic(x, 1)


def bessel_i0_i1_k0_k1(x):
    """I0, I1, K0, K1 at a scalar x > 0."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"Bessel arguments need x > 0, got {x}")
    if x <= K_SERIES_MAX:
        i0, i1, k0r, k1r = _small_series(x)
        lg = math.log(0.5 * x)
        return i0, i1, k0r - lg * i0, 1.0 / x + lg * i1 + k1r
    i0, i1 = bessel_i0_i1(x)
    return i0, i1, _k_quadrature(x, 0), _k_quadrature(x, 1)


def _log_plus_k0(r, mu):
    """``ln r + K0(mu r)`` and its r-derivative, finite as r -> 0."""
    if r == 0.0:
        return -(math.log(0.5 * mu) + EULER_GAMMA), 0.0
    x = mu * r
    if x <= K_SERIES_MAX:
        i0, i1, k0r, k1r = _small_series(x)
        val = math.log(r) * (1.0 - i0) - math.log(0.5 * mu) * i0 + k0r
        der = -mu * math.log(0.5 * x) * i1 - mu * k1r
        return val, der
    _, _, k0, k1 = bessel_i0_i1_k0_k1(x)
    return math.log(r) + k0, 1.0 / r - mu * k1


def _sinh_minus_x(x):
    if x >= 0.5:
        return math.sinh(x) - x
    term = total = x**3 / 6.0
    k = 1
    while abs(term) > 1e-18 * total:
        term *= x * x / ((2 * k + 2) * (2 * k + 3))
        total += term
        k += 1
    return total


def _scaled_d2(r, mu):
    """``(I0(mu r) - 1)/mu^2`` and ``(ln r + K0(mu r) + (ln(mu/2) + gamma) I0(mu r))/mu^2``.

    Both are regular at r = 0; values and r-derivatives by the ascending series
    (``mu r <= 1``).  As mu -> 0 they tend to r^2/4 and r^2/4 - r^2 ln(r)/4.
    """
    if r == 0.0:
        return (0.0, 0.0), (0.0, 0.0)
    q = 0.25 * (mu * r) ** 2
    term = 1.0  # q^k / (k!)^2
    harmonic = 0.0
    j = jd = s = sd = 0.0  # sums over k >= 1 and their r-derivatives / (r/2)
    k = 0
    while True:
        k += 1
        harmonic += 1.0 / k
        term *= q / (k * k)
        j += term
        s += harmonic * term
        jd += k * term
        sd += k * harmonic * term
        if term < 1e-18:
            break
    lr = math.log(r)
    mu2 = mu * mu
    J, dJ = j / mu2, 2.0 * jd / (r * mu2)
    Q = s / mu2 - lr * J
    dQ = 2.0 * sd / (r * mu2) - J / r - lr * dJ
    return (J, Q), (dJ, dQ)


def _basis(tag, r, mu):
    """Values and r-derivatives of the four basis functions at r >= 0."""
    if tag == "poly_d1":
        return [1.0, r, r * r, r**3], [0.0, 1.0, 2 * r, 3 * r * r]
    if tag == "scaled_d1":
        # (cosh - 1)/mu^2 and (sinh - x)/mu^3, tending to r^2/2 and r^3/6
        x = mu * r
        c = 2.0 * math.sinh(0.5 * x) ** 2
        return [1.0, r, c / mu**2, _sinh_minus_x(x) / mu**3], [0.0, 1.0, math.sinh(x) / mu, c / mu**2]
    if tag == "scaled_d2":
        (J, Q), (dJ, dQ) = _scaled_d2(r, mu)
        return [1.0, 0.0, J, Q], [0.0, 0.0, dJ, dQ]
    if tag == "cosh_d1":
        # span{cosh, sinh} written with decaying exponentials for conditioning
        a, b = math.exp(-mu * r), math.exp(-mu * (1.0 - r))
        return [1.0, r, a, b], [0.0, 1.0, -mu * a, mu * b]
    if tag == "log_d2":
        if r == 0.0:
            # ln r is discarded by the regularity row; its column value is irrelevant
            return [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]
        lr = math.log(r)
        return [1.0, lr, r * r, r * r * lr], [0.0, 1.0 / r, 2 * r, 2 * r * lr + r]
    if tag == "bessel_d2":
        # columns: 1, ln r, I0(mu r), K0(mu r); only the pairing ln r + K0 is regular
        if r == 0.0:
            return [1.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0]
        i0, i1, k0, k1 = bessel_i0_i1_k0_k1(mu * r)
        return [1.0, math.log(r), i0, k0], [0.0, 1.0 / r, mu * i1, -mu * k1]
    raise ValueError(f"unknown basis {tag!r}")


@dataclass(frozen=True)
class OmegaProfile:
    """Closed-form end point; call it on radii in [0, 1]."""

    coefficients: tuple
    basis_tag: str
    d: int
    B: float
    T: float
    constraint_residual: float = 0.0

    @property
    def mu(self):
        return math.sqrt(self.T / self.B)

    def _eval(self, r):
        c = self.coefficients
        if self.basis_tag == "bessel_d2":
            # ln r and K0 share a coefficient; evaluate the pair together
            i0, i1 = bessel_i0_i1(self.mu * r)
            lk, dlk = _log_plus_k0(r, self.mu)
            return c[0] + c[2] * i0 + c[3] * lk, c[2] * self.mu * i1 + c[3] * dlk
        if self.basis_tag == "log_d2":
            if r == 0.0:
                return c[0], 0.0
        vals, ders = _basis(self.basis_tag, r, self.mu)
        return float(np.dot(c, vals)), float(np.dot(c, ders))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.array([self._eval(float(x))[0] for x in r.ravel()])
        return out.reshape(r.shape) if r.ndim else float(out[0])

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.array([self._eval(float(x))[1] for x in r.ravel()])
        return out.reshape(r.shape) if r.ndim else float(out[0])


def omega_profile(d, B, T):
    """Solve the 4x4 boundary system for the end-point profile."""
    if d not in (1, 2) or not B > 0 or not T >= 0:
        raise ValueError(f"invalid parameters d={d}, B={B}, T={T}")
    mu = math.sqrt(T / B)
    if T == 0:
        tag = "poly_d1" if d == 1 else "log_d2"
    elif mu <= SCALED_MU_MAX:
        tag = "scaled_d1" if d == 1 else "scaled_d2"
    else:
        tag = "cosh_d1" if d == 1 else "bessel_d2"
    v0, d0 = _basis(tag, 0.0, mu)
    v1, d1 = _basis(tag, 1.0, mu)
    if d == 1:
        # w(0) = -1, w'(0) = 0, w(1) = 0, w'(1) = 0
        rows = [v0, d0, v1, d1]
        rhs = [-1.0, 0.0, 0.0, 0.0]
        reg = None
    elif tag in ("log_d2", "scaled_d2"):
        # bounded at 0: no ln r; the other columns have zero gradient at 0
        rows = [[0.0, 1.0, 0.0, 0.0], v0, v1, d1]
        rhs = [0.0, -1.0, 0.0, 0.0]
        reg = np.array([0.0, 1.0, 0.0, 0.0])
    else:
        # gradient regularity: coefficient of ln r equals that of K0.
        # value at 0 uses the finite limit of ln r + K0(mu r).
        lk0 = _log_plus_k0(0.0, mu)[0]
        rows = [[0.0, 1.0, 0.0, -1.0], [1.0, 0.0, 1.0, lk0], v1, d1]
        rhs = [0.0, -1.0, 0.0, 0.0]
        reg = np.array([0.0, 1.0, 0.0, -1.0])
    mat = np.array(rows, dtype=float)
    # the Bessel columns grow like exp(mu); judge conditioning column-scaled
    scale = np.abs(mat).max(axis=0)
    if np.any(scale == 0) or np.linalg.cond(mat / scale) > 1e12:
        raise np.linalg.LinAlgError("singular end-point boundary system")
    coef = np.linalg.solve(mat, np.array(rhs))
    cres = float(abs(reg @ coef)) if reg is not None else 0.0
    return OmegaProfile(tuple(float(c) for c in coef), tag, d, float(B), float(T), cres)


def linear_response(grid, B, T, opA=None):
    """Clamped deflection under unit load, ``A_h^{-1}[1]``, as a field.

    Small-lambda stationary solutions satisfy ``u ~ -lambda * response``.
    """
    if opA is None:
        opA = assemble_A(grid, B, T)
    return extend(solve(opA, np.ones(opA.n_unknowns)))
