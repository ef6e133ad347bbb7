"""Model parameters, the singular nonlinearity and scalar touchdown helpers.

The stationary and evolution problems share the source term
``-lambda * g(u)`` with ``g(xi) = (1 + xi)**-2``.  All functions accept
scalars or numpy arrays.
"""

from dataclasses import dataclass

import numpy as np

# xi <= -1 + GUARD is treated as outside the domain of g
GUARD = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of a model function.

    Raised when a deflection reaches (or crosses) the touchdown value -1.
    Newton-type callers catch it and damp their step.
    """


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the radial MEMS problem.

    Attributes
    ----------
    d : int
        Space dimension, 1 or 2.
    B : float
        Bending coefficient, > 0.
    T : float
        Stretching coefficient, >= 0.
    lam : float
        Voltage parameter lambda, >= 0.
    gamma : float
        Inertia coefficient; 0 selects the parabolic model.
    """

    d: int = 1
    B: float = 1.0
    T: float = 0.0
    lam: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if not self.B > 0:
            raise ValueError(f"B must be positive, got {self.B}")
        if not self.T >= 0:
            raise ValueError(f"T must be non-negative, got {self.T}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")

    def with_lambda(self, lam):
        return ModelParams(self.d, self.B, self.T, lam, self.gamma)


def _check(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(~(xi > -1.0 + GUARD)):
        raise DomainError(f"argument {np.min(xi)!r} at or below -1 + {GUARD}")
    return xi


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def g(xi):
    return _out((1.0 + _check(xi)) ** -2)


def g_prime(xi):
    return _out(-2.0 * (1.0 + _check(xi)) ** -3)


def g_second(xi):
    return _out(6.0 * (1.0 + _check(xi)) ** -4)


def chi(z, m1, lam):
    """``m1 * z + lam * g(z)``, the scalar comparison function for N(t)."""
    return _out(m1 * np.asarray(z, dtype=float) + lam * (1.0 + _check(z)) ** -2)


def z_lambda(m1, lam):
    """Minimiser of :func:`chi` on (-1, inf)."""
    if not (m1 > 0 and lam > 0):
        raise ValueError("z_lambda needs m1 > 0 and lam > 0")
    return (2.0 * lam / m1) ** (1.0 / 3.0) - 1.0


def chi_min(m1, lam):
    """Closed form of ``chi(z_lambda)``; positive iff ``lam > 4 m1 / 27``."""
    return 3.0 * (m1 * m1 * lam / 4.0) ** (1.0 / 3.0) - m1


def i_d(z, d):
    """Integrability gauge ``I_d`` of the minimum: ``z**(-4/3) - 1`` (d=1), ``-ln z`` (d=2).

    Defined on (0, 1]; the value at z = 1 is the limit 0.
    """
    z = np.asarray(z, dtype=float)
    if np.any(~((z > 0) & (z <= 1))):
        raise DomainError(f"i_d needs 0 < z <= 1, got {z!r}")
    if d == 1:
        out = z ** (-4.0 / 3.0) - 1.0
    elif d == 2:
        out = -np.log(z)
    else:
        raise ValueError(f"d must be 1 or 2, got {d}")
    return _out(out)


@dataclass(frozen=True)
class ScalarDiagnostics:
    """The scalar functions attached to one (m1, lambda, d) triple."""

    m1: float
    lam: float
    d: int

    def chi_at(self, z):
        return chi(z, self.m1, self.lam)

    @property
    def z_lambda(self):
        return z_lambda(self.m1, self.lam)

    @property
    def chi_floor(self):
        return chi_min(self.m1, self.lam)

    def i_d_at(self, z):
        return i_d(z, self.d)
