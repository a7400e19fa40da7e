import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlasso import ColumnSelection, ProblemInstance, ZeroResidual, solve_lasso, solve_srlasso
from srlasso.regularity import check_regularity, detect_sets
from srlasso.sensitivity import (FD_SETTINGS, analytic_solution, directional_derivative,
                                 fd_directional, fd_jacobian_b, fd_jacobian_lambda,
                                 jacobian_strong, lambda_derivative_closed_form,
                                 lipschitz_bounds, phi, phi_partials, relative_error,
                                 sensitivity_report)

from conftest import EX2_B, gaussian_instance


def strong_instance(seed, m=30, n=60, s=4, gamma=0.1, lam=1.0):
    rng = np.random.default_rng(seed)
    A, b, _ = gaussian_instance(rng, m, n, s, gamma)
    p = ProblemInstance(A, b, lam)
    pair = solve_srlasso(p, FD_SETTINGS)
    pair, sets, rep = check_regularity(p, pair)
    return p, pair, sets, rep


def test_analytic_solution_example_two(ex2):
    y = EX2_B / np.linalg.norm(EX2_B)
    x = analytic_solution(ex2, y, ColumnSelection((1,), 3))
    assert np.max(np.abs(x)) <= 1e-10


def test_analytic_solution_empty_j(ex2):
    assert not analytic_solution(ex2, EX2_B / np.linalg.norm(EX2_B), ColumnSelection((), 3)).any()


@pytest.mark.parametrize("seed", range(5))
def test_analytic_solution_matches_solver(seed):
    p, pair, sets, rep = strong_instance(seed)
    assert rep.intermediate
    y = pair.residual / pair.residual_norm
    np.testing.assert_allclose(analytic_solution(p, y, sets.equicorrelation_J), pair.x,
                               atol=1e-6 * max(1.0, np.max(np.abs(pair.x))))


def test_directional_derivative_zero_direction():
    p, pair, sets, _ = strong_instance(1)
    w, _ = directional_derivative(p, pair, sets, np.zeros(p.A.shape[0]), 0.0)
    assert not np.any(np.abs(w) > 1e-14)


def test_directional_derivative_strong_is_linear():
    p, pair, sets, rep = strong_instance(2)
    assert rep.strong
    rng = np.random.default_rng(0)
    q1, q2 = rng.standard_normal((2, p.A.shape[0]))
    jb, jl = jacobian_strong(p, pair, sets)
    w1, K1 = directional_derivative(p, pair, sets, q1, 0.3)
    w2, _ = directional_derivative(p, pair, sets, q2, -0.7)
    w12, _ = directional_derivative(p, pair, sets, q1 + q2, -0.4)
    assert K1 == sets.support_I
    np.testing.assert_allclose(w1 + w2, w12, atol=1e-10)
    np.testing.assert_allclose(w1, jb @ q1 + 0.3 * jl, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_directional_derivative_finite_difference(seed):
    p, pair, sets, rep = strong_instance(10 + seed)
    assert rep.intermediate
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(p.A.shape[0])
    w, _ = directional_derivative(p, pair, sets, q, 0.5)
    assert relative_error(fd_directional(p, pair.x, q, 0.5), w) <= 1e-3


def test_directional_derivative_example_two(ex2):
    pair = solve_srlasso(ex2)
    sets = detect_sets(ex2, pair)
    # increasing lam keeps the zero solution; decreasing it activates column 2
    w_up, _ = directional_derivative(ex2, pair, sets, np.zeros(2), 1.0)
    w_down, K = directional_derivative(ex2, pair, sets, np.zeros(2), -1.0)
    assert not np.any(np.abs(w_up) > 1e-12)
    assert K.indices == (1,) and w_down[1] > 0
    assert relative_error(fd_directional(ex2, pair.x, np.zeros(2), -1.0), w_down) <= 1e-3


def test_jacobian_empty_support():
    p = ProblemInstance(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.3, 0.4], 1.0)
    pair, sets, rep = check_regularity(p)
    assert rep.strong and len(sets.support_I) == 0
    jb, jl = jacobian_strong(p, pair, sets)
    assert not jb.any() and not jl.any()


@pytest.mark.parametrize("seed", range(4))
def test_lambda_jacobian_closed_form(seed):
    p, pair, sets, rep = strong_instance(20 + seed)
    assert rep.strong
    _, jl = jacobian_strong(p, pair, sets)
    np.testing.assert_allclose(jl, lambda_derivative_closed_form(p, pair, sets),
                               rtol=1e-10, atol=1e-10 * np.max(np.abs(jl)))


@pytest.mark.parametrize("seed", range(3))
def test_jacobians_match_finite_differences(seed):
    p, pair, sets, rep = strong_instance(30 + seed)
    assert rep.strong
    jb, jl = jacobian_strong(p, pair, sets)
    assert relative_error(fd_jacobian_b(p, pair.x), jb) <= 1e-5
    assert relative_error(fd_jacobian_lambda(p, pair.x), jl) <= 1e-5


def test_lipschitz_bounds_empty_support():
    p = ProblemInstance(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.3, 0.4], 1.0)
    pair, sets, _ = check_regularity(p)
    rep = lipschitz_bounds(p, pair, sets)
    assert rep.L_SR_lambda_bound == 0.0 and rep.V == 0.0


def test_v_relation_is_exact_for_shared_support_and_residual():
    """With the same support and residual, L_UC = L_SR |1 - V| by the formulas."""
    p, pair, sets, rep = strong_instance(40)
    assert rep.strong
    r = pair.residual
    # a LASSO solution with the same (I, r) exists at lam_uc = lam ||r||
    lam_uc = p.lam * float(np.linalg.norm(r))
    rb = lipschitz_bounds(p, pair, sets, pair, lam_uc)
    np.testing.assert_allclose(rb.L_UC_lambda_bound * lam_uc,
                               rb.L_SR_lambda_bound * abs(1 - rb.V) * p.lam, rtol=1e-10)
    uc = solve_lasso(p.with_data(lam=lam_uc), FD_SETTINGS)
    np.testing.assert_allclose(uc.x, pair.x, atol=1e-6 * np.max(np.abs(pair.x)))


@pytest.mark.parametrize("seed", range(3))
def test_local_lipschitz_bound(seed):
    p, pair, sets, rep = strong_instance(50 + seed)
    assert rep.strong
    L = lipschitz_bounds(p, pair, sets).L_SR_lambda_bound
    for delta in (-1e-3, -1e-4, -1e-5, 1e-5, 1e-4, 1e-3):
        lam = p.lam * (1 + delta)
        x = solve_srlasso(p.with_data(lam=lam), FD_SETTINGS, x0=pair.x).x
        assert np.linalg.norm(x - pair.x) <= 1.05 * L * abs(lam - p.lam)


def test_phi_partials_hand_value():
    A = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 3)))[0]
    b = np.array([1.0, 2.0, 0.0, -1.0, 0.5])
    b /= np.linalg.norm(b)
    lam = 0.7
    d_b, d_lam, d_x = phi_partials(A, b, lam, np.zeros(3))
    # phi(0) = -A^T b / lam, so its lam-derivative is +A^T b / lam^2
    np.testing.assert_allclose(d_lam, A.T @ b / lam**2, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_phi_partials_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    A, b, x = rng.standard_normal((4, 3)), rng.standard_normal(4), rng.standard_normal(3)
    lam = 0.5 + rng.random()
    d_b, d_lam, d_x = phi_partials(A, b, lam, x)
    assert np.all(np.linalg.eigvalsh(d_x) >= -1e-12)
    np.testing.assert_allclose(d_x, d_x.T)
    h = 1e-6
    fd_b = np.column_stack([(phi(A, b + h * e, lam, x) - phi(A, b - h * e, lam, x)) / (2 * h)
                            for e in np.eye(4)])
    fd_x = np.column_stack([(phi(A, b, lam, x + h * e) - phi(A, b, lam, x - h * e)) / (2 * h)
                            for e in np.eye(3)])
    fd_l = (phi(A, b, lam + h, x) - phi(A, b, lam - h, x)) / (2 * h)
    assert relative_error(fd_b, d_b) <= 1e-6
    assert relative_error(fd_x, d_x) <= 1e-6
    assert relative_error(fd_l, d_lam) <= 1e-6


def test_phi_zero_residual():
    with pytest.raises(ZeroResidual):
        phi_partials(np.eye(2), [1.0, 1.0], 1.0, [1.0, 1.0])


def test_sensitivity_report_validation():
    p, pair, sets, rep = strong_instance(60)
    q = np.random.default_rng(1).standard_normal(p.A.shape[0])
    out = sensitivity_report(p, pair, sets, q, 0.2, validate=True)
    assert out.jacobian_b is not None and out.L_SR_lambda_bound is not None
    assert set(out.validation) == {"jacobian_b_rel_err", "jacobian_lambda_rel_err",
                                   "directional_rel_err"}
    assert max(out.validation.values()) <= 1e-3


def test_relative_error_conventions():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.ones(2), np.zeros(2)) == 1.0
    assert relative_error([1.1, 2.0], [1.0, 2.0]) == pytest.approx(0.05)
