"""Shared test data: independent oracles and a cache of computed branches."""

import math
import numpy as np

from mems4.branch import ContinuationOptions, continue_branch
from mems4.model import ModelParams

# criterion number -> (passed, detail); printed by conftest at the end of the run
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    return passed


# ---------------------------------------------------------------- oracles


def bisect(f, a, b, tol=1e-15):
    fa = f(a)
    assert fa * f(b) < 0
    while b - a > tol * max(1.0, abs(a)):
        c = 0.5 * (a + b)
        fc = f(c)
        if fa * fc <= 0:
            b = c
        else:
            a, fa = c, fc
    return 0.5 * (a + b)


def beam_m1(B=1.0):
    """Clamped beam on (-1, 1): m1 = B beta^4 with cos(2 beta) cosh(2 beta) = 1."""
    k = bisect(lambda k: math.cos(k) * math.cosh(k) - 1.0, 4.0, 5.0)
    return B * (k / 2) ** 4


def dense_solve(a, b):
    """Gaussian elimination with partial pivoting, independent of LAPACK banded code."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        a[[k, p]] = a[[p, k]]
        b[[k, p]] = b[[p, k]]
        f = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(f, a[k, k:])
        b[k + 1 :] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def bessel_series(x, terms=80):
    """I0, I1, K0, K1 from the textbook ascending series."""
    gamma = 0.57721566490153286061
    q = 0.25 * x * x
    i0 = sum(q**k / math.factorial(k) ** 2 for k in range(terms))
    i1 = 0.5 * x * sum(q**k / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))
    harm = [sum(1.0 / j for j in range(1, k + 1)) for k in range(terms)]
    k0 = -(math.log(0.5 * x) + gamma) * i0 + sum(harm[k] * q**k / math.factorial(k) ** 2 for k in range(terms))
    return i0, i1, k0


def exact_A_quartic(r, d, B, T):
    """A applied to (1 - r^2)^2 by hand."""
    if d == 1:
        return 24.0 * B - T * (12 * r**2 - 4)
    return 64.0 * B - T * (16 * r**2 - 8)


# ---------------------------------------------------------------- branches

STANDARD_CASES = [(1, 0.0), (1, 50.0), (2, 0.0), (2, 50.0)]


_BRANCHES = {}


def branch(d, T, n=200, lambda_stop=1e-3, eps_min=1e-3):
    """Continuation with default options, computed once per session."""
    key = (d, T, n, lambda_stop, eps_min)
    if key not in _BRANCHES:
        opts = ContinuationOptions(lambda_stop=lambda_stop, eps_min=eps_min)
        _BRANCHES[key] = continue_branch(ModelParams(d, 1.0, T), n=n, opts=opts)
    return _BRANCHES[key]


def computed_branches():
    return dict(_BRANCHES)
