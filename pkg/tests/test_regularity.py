import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlasso import ColumnSelection, Indeterminate, ProblemInstance, solve_srlasso
from srlasso.experiments.data import DataModel, generate_instance, lambda_star
from srlasso.regularity import (RegularityReport, SupportSets, check_intermediate,
                                check_regularity, check_strong, check_weak, detect_sets,
                                implication_audit, project_l1_ball, solve_auxiliary)

from conftest import EX1_B, EX2_B


def zstar_linprog(A, I, y):
    """Independent value of min ||A_{I^C}^T (y + z)||_inf over z orthogonal to A_I and y."""
    optimize = pytest.importorskip("scipy.optimize")
    m, n = A.shape
    Ic = [j for j in range(n) if j not in I]
    C = A[:, Ic]
    B = np.column_stack([A[:, list(I)], y]) if I else y[:, None]
    k = len(Ic)
    # variables (z, t); minimize t
    cost = np.r_[np.zeros(m), 1.0]
    G = np.block([[C.T, -np.ones((k, 1))], [-C.T, -np.ones((k, 1))]])
    h = np.r_[-C.T @ y, C.T @ y]
    E = np.c_[B.T, np.zeros((B.shape[1], 1))]
    res = optimize.linprog(cost, A_ub=G, b_ub=h, A_eq=E, b_eq=np.zeros(B.shape[1]),
                           bounds=[(None, None)] * m + [(0, None)], method="highs")
    assert res.status == 0
    return res.fun


def test_detect_sets_examples(ex1, ex2):
    s1 = detect_sets(ex1, solve_srlasso(ex1))
    assert s1.support_I.indices == () and s1.equicorrelation_J.indices == (1, 2)
    assert s1.to_dict(one_based=True)["J"] == [2, 3]
    s2 = detect_sets(ex2, solve_srlasso(ex2))
    assert s2.support_I.indices == () and s2.equicorrelation_J.indices == (1,)
    assert s1.residual_nonzero and s2.residual_nonzero


def test_detect_sets_exact_fit():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 8))
    x0 = np.zeros(8)
    x0[[1, 4]] = [1.5, -2.0]
    p = ProblemInstance(A, A @ x0, 1e-8)
    pair = solve_srlasso(p)
    sets = detect_sets(p, pair)
    assert not sets.residual_nonzero
    assert sets.equicorrelation_J.indices == ()


def test_auxiliary_example_one(ex1):
    pair = solve_srlasso(ex1)
    sets = detect_sets(ex1, pair)
    y = EX1_B / np.linalg.norm(EX1_B)
    Z, z = solve_auxiliary(ex1, sets, y)
    lam = ex1.lam
    assert Z <= 5 * lam / 6 + 1e-6
    z_paper = lam / 6 * np.array([2.0, -1.0])
    assert np.max(np.abs(ex1.A.T @ (y + z_paper))) == pytest.approx(5 * lam / 6)
    # the witness is feasible and achieves the reported value
    assert abs(z @ y) <= 1e-9
    assert np.max(np.abs(ex1.A.T @ (y + z))) == pytest.approx(Z, abs=1e-12)
    assert Z == pytest.approx(zstar_linprog(ex1.A, (), y), abs=1e-8)


def test_auxiliary_full_support_is_zero():
    p = ProblemInstance(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), [1.0, 2.0, 0.0], 0.1)
    sets = SupportSets(ColumnSelection((0, 1), 2), ColumnSelection((0, 1), 2), 1e-6, 1e-7, True)
    Z, z = solve_auxiliary(p, sets, np.array([1.0, 1.0, -1.0]) / math.sqrt(3))
    assert Z == 0.0 and not z.any()


def test_auxiliary_example_two(ex2):
    sets = detect_sets(ex2, solve_srlasso(ex2))
    y = EX2_B / np.linalg.norm(EX2_B)
    assert np.max(np.abs(ex2.A.T @ y)) == pytest.approx(ex2.lam)  # z = 0 is feasible
    Z, _ = solve_auxiliary(ex2, sets, y)
    assert Z < ex2.lam
    assert Z == pytest.approx(zstar_linprog(ex2.A, (), y), abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_auxiliary_matches_linear_program(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 9))
    b = rng.standard_normal(6)
    p = ProblemInstance(A, b, 0.6)
    pair = solve_srlasso(p)
    sets = detect_sets(p, pair)
    if not sets.residual_nonzero:
        return
    y = pair.residual / pair.residual_norm
    res = solve_auxiliary(p, sets, y, return_info=True)
    ref = zstar_linprog(A, sets.support_I.indices, y)
    assert res.lower_bound - 1e-9 <= ref <= res.Zstar + 1e-9
    assert res.Zstar == pytest.approx(ref, abs=1e-7)


def test_check_weak_examples(ex1, ex2):
    for p in (ex1, ex2):
        pair = solve_srlasso(p)
        assert check_weak(p, pair, detect_sets(p, pair)).weak is True


def test_check_weak_zero_residual_is_indeterminate():
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    p = ProblemInstance(A, [1.0, 1.0], 1e-6)
    _, sets, rep = check_regularity(p)
    assert not sets.residual_nonzero
    assert rep.weak is None and rep.weak_optimum_Zstar == math.inf
    assert not rep.determinate
    with pytest.raises(Indeterminate):
        implication_audit(rep)


def test_check_intermediate_examples(ex1, ex2):
    p1 = solve_srlasso(ex1)
    assert check_intermediate(ex1, p1, detect_sets(ex1, p1)).intermediate is False
    p2 = solve_srlasso(ex2)
    rep = check_intermediate(ex2, p2, detect_sets(ex2, p2))
    assert rep.intermediate is True and rep.rank_AJ_full and not rep.b_in_range_AJ


def test_check_intermediate_vacuous_when_j_empty():
    p = ProblemInstance(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.3, 0.4], 1.0)
    pair = solve_srlasso(p)
    sets = detect_sets(p, pair)
    assert sets.equicorrelation_J.indices == ()
    rep = check_intermediate(p, pair, sets)
    assert rep.intermediate is True and rep.intermediate_vacuous is True


def test_check_strong_examples(ex2):
    pair = solve_srlasso(ex2)
    rep = check_strong(ex2, pair, detect_sets(ex2, pair))
    assert rep.strong is False
    assert rep.strong_margin == pytest.approx(0.0, abs=1e-9)


def test_check_strong_separated_support():
    # small off-support columns: ||A_{I^C}^T|| < lam forces strict slackness
    A = np.array([[1.0, 0.1, 0.1], [0.0, 0.2, 0.0], [0.0, 0.0, 0.2]])
    p = ProblemInstance(A, [3.0, 0.1, 1.0], 0.5)
    pair, sets, rep = check_regularity(p)
    assert sets.support_I.indices == (0,)
    assert np.linalg.norm(A[:, 1:].T, 2) < p.lam
    assert rep.strong and rep.intermediate and rep.weak


def test_strong_majority_on_synthetic_instances():
    lam = lambda_star("SR", 200)
    strong = 0
    for seed in range(20):
        inst = generate_instance(DataModel(100, 200, 5, 0.5, seed))
        _, _, rep = check_regularity(inst.problem(lam))
        strong += bool(rep.strong)
        if rep.determinate:
            assert implication_audit(rep)
    assert strong >= 11


def test_implication_audit_cases():
    assert implication_audit(RegularityReport(weak=True, intermediate=True, strong=True))
    assert implication_audit(RegularityReport(weak=True, intermediate=True, strong=False))
    assert not implication_audit(RegularityReport(weak=True, intermediate=False, strong=True))
    with pytest.raises(Indeterminate):
        implication_audit(RegularityReport(weak=None, intermediate=True, strong=True))


def test_report_merge_keeps_set_fields():
    a = RegularityReport(weak=True)
    b = RegularityReport(strong=False, weak=None)
    merged = a.merge(b)
    assert merged.weak is True and merged.strong is False and merged.intermediate is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(0.1, 3))
def test_project_l1_ball(v, radius):
    v = np.array(v)
    w = project_l1_ball(v, radius)
    assert np.abs(w).sum() <= radius * (1 + 1e-12)
    if np.abs(v).sum() <= radius:
        np.testing.assert_allclose(w, v)
    else:
        # projection optimality: <v - w, u - w> <= 0 for the extreme points u of the ball
        for j in range(v.size):
            for sgn in (-1, 1):
                u = np.zeros_like(v)
                u[j] = sgn * radius
                assert (v - w) @ (u - w) <= 1e-9
