import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import support
from mems4.banded import mu1
from mems4.branch import (
    ContinuationOptions,
    NewtonError,
    NoFoldError,
    certify,
    continue_branch,
    locate_fold,
    locate_folds,
    newton_solve,
    residual,
    residual_floor,
    sign_changes,
    two_solutions_at,
)
from mems4.closed_form import linear_response
from mems4.model import ModelParams, g_prime
from mems4.radial import assemble_A, build_grid, extend


@pytest.fixture(scope="module")
def op80():
    return assemble_A(build_grid(80, 1), 1.0, 0.0)


def test_residual_examples(op80):
    m = op80.n_unknowns
    assert np.array_equal(residual(np.zeros(m), 0.0, op80), np.zeros(m))
    assert np.allclose(residual(np.zeros(m), 2.0, op80), 2.0)
    assert np.allclose(residual(np.zeros(m), 2.0, op80, rhs=np.full(m, 2.0)), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 10.0), st.integers(0, 2**31 - 1))
def test_jacobian_matches_finite_differences(lam, seed):
    op = assemble_A(build_grid(30, 2), 1.0, 5.0)
    rng = np.random.default_rng(seed)
    u = -0.5 * rng.uniform(0, 1, op.n_unknowns)
    v = rng.standard_normal(op.n_unknowns)
    eps = 1e-6
    fd = (residual(u + eps * v, lam, op) - residual(u - eps * v, lam, op)) / (2 * eps)
    jv = op.matvec(v) + lam * g_prime(u) * v
    assert np.abs(fd - jv).max() <= 1e-5 * np.abs(jv).max()


def test_newton_at_zero_lambda_is_zero(op80):
    u = newton_solve(np.zeros(op80.n_unknowns), 0.0, op80)
    assert u.shape == (81,) and np.all(u == 0.0)


def test_newton_small_lambda_matches_linear_response(op80):
    # u = -lam R + O(lam^2) with R the unit-load response
    resp = linear_response(op80.grid, 1.0, 0.0, op80)
    errs = []
    for lam in (1e-2, 5e-3):
        u = newton_solve(np.zeros(op80.n_unknowns), lam, op80, tol=1e-14)
        errs.append(np.abs(u + lam * resp).max())
    assert errs[1] <= 1e-2 * 5e-3 * resp.max()
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)


def test_newton_full_output_and_residual(op80):
    u, info = newton_solve(np.zeros(op80.n_unknowns), 2.0, op80, tol=1e-10, full_output=True)
    assert info.residual <= max(1e-10, info.floor)
    assert np.abs(residual(u, 2.0, op80)).max() <= max(1e-10, info.floor)
    assert u[-1] == 0.0


def test_newton_fails_above_the_fold(op80):
    with pytest.raises(NewtonError):
        newton_solve(np.zeros(op80.n_unknowns), 3 * 4.39, op80, maxiter=40)


def test_newton_rhs_problem():
    op = assemble_A(build_grid(40, 1), 1.0, 0.0)
    shifted = op.add_diagonal(10.0)
    rhs = np.linspace(-0.1, 0.0, op.n_unknowns)
    u = newton_solve(np.zeros(op.n_unknowns), 0.5, shifted, rhs=rhs, tol=1e-12)
    assert np.abs(residual(u, 0.5, shifted, rhs)).max() <= 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.8))
def test_stable_solutions_ordered_in_lambda(frac):
    # maximal solutions decrease pointwise as lambda grows
    op = assemble_A(build_grid(40, 1), 1.0, 0.0)
    lam1 = frac * 4.38
    lam2 = lam1 * 1.1
    u1 = newton_solve(np.zeros(op.n_unknowns), lam1, op, tol=1e-11)
    u2 = newton_solve(u1, lam2, op, tol=1e-11)
    assert np.all(u2 <= u1 + 1e-12)
    assert mu1(u2, lam2, op).value > 0


@pytest.mark.parametrize("values, count", [([1, 2, 3], 0), ([1, -1, 1], 2), ([-1, 0, 0, 2], 1), ([0, 0], 0)])
def test_sign_changes(values, count):
    assert sign_changes(values) == count


def test_certify_zero_field():
    grid = build_grid(40, 2)
    c = certify(np.zeros(41), 0.0, grid, 100.0, np.ones(41) / np.pi)
    assert c.passed and c.flags == "111111"
    assert c.phi1_value == 0.0 and c.lam_i_d == 0.0


def test_certify_detects_violations():
    grid = build_grid(40, 1)
    r = grid.nodes
    phi = np.ones(41) / 2
    good = -0.3 * (1 - r**2) ** 2
    assert certify(good, 1.0, grid, 31.0, phi).passed
    bumped = good.copy()
    bumped[20] = 0.05
    c = certify(bumped, 1.0, grid, 31.0, phi)
    assert not c.bounds and not c.monotone
    assert not certify(good, 40.0, grid, 31.0, phi).lam_below_m1
    wavy = good + 0.01 * np.sin(12 * np.pi * r) * (1 - r) ** 2 * r
    assert not certify(wavy, 1.0, grid, 31.0, phi).passed


@pytest.fixture(scope="module")
def coarse_branch():
    return support.branch(1, 0.0, 100)


def test_branch_structure(coarse_branch):
    b = coarse_branch
    assert b.stop_reason in ("lambda_stop", "eps_min")
    s = b.arclengths
    assert np.all(np.diff(s) > 0)
    assert np.all(b.lams[1:] > 0)
    # the center deflection deepens monotonically along the curve
    assert np.all(np.diff(b.centers) < 0)
    assert b.all_accepted
    assert len(b.folds) == 1


def test_mu1_sign_flips_once_at_the_fold(coarse_branch):
    b = coarse_branch
    k = b.fold.index
    mus = b.mu1s
    assert np.all(mus[: k - 1] > 0)
    assert np.all(mus[k + 2 :] < 0)
    assert abs(b.fold.mu1) <= 1e-3 * b.m1


def test_fold_is_the_maximum_of_lambda(coarse_branch):
    b = coarse_branch
    assert b.fold.lam >= b.lams.max() - 1e-10 * b.m1
    assert b.fold.curvature < 0
    assert np.all(b.fold.phi_star[:-1] > 0)


def test_locate_fold_matches_continuation(coarse_branch):
    again = locate_fold(coarse_branch)
    assert again.lam == pytest.approx(coarse_branch.fold.lam, rel=1e-8)
    assert len(locate_folds(coarse_branch)) == 1


@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
def test_two_solutions(coarse_branch, frac):
    b = coarse_branch
    lam = frac * b.fold.lam
    us, uu = two_solutions_at(lam, b)
    assert np.all(uu <= us + 1e-12)
    assert np.abs(us - uu).max() > 1e-2
    assert mu1(us, lam, b.opA).value > 0
    assert mu1(uu, lam, b.opA).value < 0
    for u in (us, uu):
        assert np.abs(residual(u, lam, b.opA)).max() <= max(1e-8, residual_floor(b.opA, u, lam))


@pytest.mark.parametrize("lam", [0.0, -1.0, 5.0])
def test_two_solutions_outside_range(coarse_branch, lam):
    with pytest.raises(ValueError):
        two_solutions_at(lam, coarse_branch)


def test_truncated_branch_has_no_fold():
    opts = ContinuationOptions(max_points=6)
    b = continue_branch(ModelParams(1, 1.0, 0.0), n=40, opts=opts)
    assert b.stop_reason == "max_points" and b.fold is None and b.endpoint_gap is None
    with pytest.raises(NoFoldError):
        locate_fold(b)
    with pytest.raises(NoFoldError):
        two_solutions_at(1.0, b)


@pytest.mark.parametrize("B", [0.5, 2.0])
def test_fold_scales_with_B(B):
    # T = 0: lam* and m1 are both linear in B
    base = support.branch(1, 0.0, 100)
    scaled = continue_branch(ModelParams(1, B, 0.0), n=100)
    assert scaled.fold.lam == pytest.approx(B * base.fold.lam, rel=1e-6)
    assert scaled.m1 == pytest.approx(B * base.m1, rel=1e-9)


def test_fold_increases_with_tension():
    lams = [continue_branch(ModelParams(1, 1.0, T), n=60).fold.lam for T in (0.0, 5.0, 20.0)]
    assert lams[0] < lams[1] < lams[2]


def test_supplied_operator_is_used():
    op = assemble_A(build_grid(50, 2), 1.0, 0.0)
    b = continue_branch(ModelParams(2, 1.0, 0.0), opA=op)
    assert b.opA is op and b.grid.n == 50


@pytest.mark.parametrize("n", [40, 50, 60, 80])
@pytest.mark.parametrize("d, T", support.STANDARD_CASES)
def test_fold_found_on_coarse_grids(d, T, n):
    # sharp turns in the (u, lambda) metric must not stall the continuation
    b = continue_branch(ModelParams(d, 1.0, T), n=n)
    assert b.stop_reason in ("lambda_stop", "eps_min")
    assert b.fold is not None and abs(b.fold.mu1) <= 1e-3 * b.m1
    assert b.all_accepted


@pytest.mark.parametrize("d, T", support.STANDARD_CASES)
def test_fold_grid_refinement_is_stable(d, T):
    lams = [support.branch(d, T, n).fold.lam for n in (100, 200, 400)]
    assert abs(lams[1] / lams[0] - 1) <= 1e-2 and abs(lams[2] / lams[1] - 1) <= 1e-2
    # and consistent with second-order convergence
    assert abs(lams[2] - lams[1]) < 0.5 * abs(lams[1] - lams[0])
