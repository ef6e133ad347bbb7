import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mems4.model import (
    DomainError,
    ModelParams,
    ScalarDiagnostics,
    chi,
    chi_min,
    g,
    g_prime,
    g_second,
    i_d,
    z_lambda,
)

admissible = st.floats(min_value=-0.999, max_value=50.0, allow_nan=False)


@pytest.mark.parametrize(
    "xi, expected",
    [(0.0, 1.0), (1.0, 0.25), (-0.5, 4.0), (-0.9, 100.0)],
)
def test_g_values(xi, expected):
    assert g(xi) == pytest.approx(expected, rel=1e-14)


def test_g_prime_and_second_at_zero():
    assert g_prime(0.0) == -2.0
    assert g_second(0.0) == 6.0


@pytest.mark.parametrize("xi", [-1.0, -1.5, -1.0 + 1e-13])
def test_domain_error(xi):
    with pytest.raises(DomainError):
        g(xi)
    with pytest.raises(DomainError):
        g(np.array([0.0, xi]))


def test_array_in_array_out():
    out = g(np.array([0.0, 1.0]))
    assert isinstance(out, np.ndarray)
    assert isinstance(g(0.5), float)


@given(admissible)
def test_derivatives_match_finite_differences(xi):
    h = 1e-6 * (1 + xi)
    fd1 = (g(xi + h) - g(xi - h)) / (2 * h)
    fd2 = (g_prime(xi + h) - g_prime(xi - h)) / (2 * h)
    assert fd1 == pytest.approx(g_prime(xi), rel=1e-6)
    assert fd2 == pytest.approx(g_second(xi), rel=1e-6)


@given(admissible, admissible, st.floats(0.0, 1.0))
def test_g_positive_decreasing_convex(a, b, t):
    assert g(a) > 0 and g_prime(a) < 0 and g_second(a) > 0
    # convexity along the segment
    mid = t * a + (1 - t) * b
    assert g(mid) <= t * g(a) + (1 - t) * g(b) + 1e-12 * max(g(a), g(b))


@given(st.floats(0.5, 500.0), st.floats(0.01, 5.0))
def test_chi_min_is_the_minimum(m1, ratio):
    lam = ratio * 4 * m1 / 27
    z = z_lambda(m1, lam)
    assert chi(z, m1, lam) == pytest.approx(chi_min(m1, lam), rel=1e-9, abs=1e-9 * m1)
    zs = np.linspace(-0.99, 5.0, 2001)
    assert np.all(chi(zs, m1, lam) >= chi_min(m1, lam) - 1e-9 * m1)


@given(st.floats(0.5, 500.0), st.floats(0.01, 5.0))
def test_chi_min_sign_threshold(m1, ratio):
    lam = ratio * 4 * m1 / 27
    if ratio > 1 + 1e-9:
        assert chi_min(m1, lam) > 0
    elif ratio < 1 - 1e-9:
        assert chi_min(m1, lam) < 0


def test_chi_min_at_threshold_is_zero():
    m1 = 31.0
    assert abs(chi_min(m1, 4 * m1 / 27)) < 1e-12 * m1


def test_z_lambda_requires_positive_arguments():
    with pytest.raises(ValueError):
        z_lambda(0.0, 1.0)
    with pytest.raises(ValueError):
        z_lambda(1.0, 0.0)


@pytest.mark.parametrize(
    "z, d, expected",
    [(1.0, 1, 0.0), (1.0, 2, 0.0), (0.125, 1, 16.0 - 1.0), (math.exp(-2), 2, 2.0)],
)
def test_i_d_values(z, d, expected):
    assert i_d(z, d) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("z", [0.0, -0.1, 1.5])
def test_i_d_domain(z):
    with pytest.raises(DomainError):
        i_d(z, 1)


@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_i_d_decreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    for d in (1, 2):
        assert i_d(lo, d) >= i_d(hi, d)


@pytest.mark.parametrize(
    "kw", [dict(d=3), dict(B=0.0), dict(T=-1.0), dict(lam=-0.1), dict(gamma=-1.0)]
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_params_with_lambda_keeps_the_rest():
    p = ModelParams(2, 2.0, 3.0, 1.0, 0.5).with_lambda(7.0)
    assert (p.d, p.B, p.T, p.lam, p.gamma) == (2, 2.0, 3.0, 7.0, 0.5)


def test_scalar_diagnostics_delegate():
    s = ScalarDiagnostics(m1=30.0, lam=10.0, d=2)
    assert s.chi_at(s.z_lambda) == pytest.approx(s.chi_floor)
    assert s.i_d_at(0.5) == pytest.approx(math.log(2))
