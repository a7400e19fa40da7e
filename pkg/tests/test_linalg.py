import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlasso import (ColumnSelection, InRange, RankDeficient, nullspace_projector,
                     pseudoinverse, range_test, smw_eigen_bound, smw_inverse, svd_summary)

R2 = 1 / np.sqrt(2)


def test_pseudoinverse_identity():
    np.testing.assert_array_equal(pseudoinverse(np.eye(2)), np.eye(2))


def test_pseudoinverse_column_vector():
    np.testing.assert_allclose(pseudoinverse(np.array([[3.0], [4.0]])), [[3 / 25, 4 / 25]],
                               atol=1e-15)


def test_pseudoinverse_zero_matrix():
    P = pseudoinverse(np.zeros((2, 3)))
    assert P.shape == (3, 2)
    assert not P.any()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pseudoinverse_penrose_conditions(m, n, seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, min(m, n) + 1)
    M = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
    P = pseudoinverse(M)
    np.testing.assert_allclose(M @ P @ M, M, atol=1e-8)
    np.testing.assert_allclose(P @ M @ P, P, atol=1e-8)
    np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-8)
    np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-8)
    assert svd_summary(M).numerical_rank == k


def test_smw_inverse_orthogonal_vector():
    np.testing.assert_allclose(smw_inverse(np.array([[1.0], [0.0]]), [0.0, 1.0]), [[1.0]])


def test_smw_inverse_hand_value():
    np.testing.assert_allclose(smw_inverse(np.array([[1.0], [0.0], [0.0]]), [R2, R2, 0.0]),
                               [[2.0]], rtol=1e-14)


def test_smw_inverse_example_two_column():
    # W = (0,2)(I - vv^T)(0,2)^T = 4 - 2 = 2
    np.testing.assert_allclose(smw_inverse(np.array([[0.0], [2.0]]), [R2, R2]), [[0.5]],
                               rtol=1e-14)


def test_smw_rejects_range_vector_and_rank_deficiency():
    with pytest.raises(InRange):
        smw_inverse(np.array([[1.0], [0.0]]), [1.0, 0.0])
    with pytest.raises(RankDeficient):
        smw_inverse(np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]), [0.0, 0.0, 1.0])


def test_smw_eigen_bound_values():
    assert smw_eigen_bound(np.array([[1.0], [0.0]]), [0.0, 1.0]) == pytest.approx(1.0)
    assert smw_eigen_bound(np.array([[1.0], [0.0], [0.0]]), [R2, R2, 0.0]) == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_smw_matches_direct_inverse_and_bound(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((5, 2))
    v = rng.standard_normal(5)
    v /= np.linalg.norm(v)
    W = M.T @ (np.eye(5) - np.outer(v, v)) @ M
    Winv = smw_inverse(M, v)
    np.testing.assert_allclose(Winv, np.linalg.inv(W), rtol=1e-8, atol=1e-10)
    assert smw_eigen_bound(M, v) >= np.linalg.eigvalsh(Winv).max() * (1 - 1e-12)


def test_range_test_cases():
    assert range_test(np.eye(2), [3.0, 7.0], 1e-10)
    assert not range_test(np.array([[1.0], [0.0]]), [0.0, 1.0], 1e-10)
    # columns 2 and 3 of the first worked example: b leaves the residual (1, 0)
    assert not range_test(np.array([[0.0, 0.0], [1.0, 1.0]]), [1.0, 2.0], 1e-10)


def test_nullspace_projector_cases():
    np.testing.assert_allclose(nullspace_projector(np.eye(2)), np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(nullspace_projector(np.array([[1.0], [0.0]])),
                               [[0.0, 0.0], [0.0, 1.0]], atol=1e-15)
    np.testing.assert_allclose(nullspace_projector(np.zeros((3, 1))), np.eye(3))


def test_column_selection_validation_and_helpers():
    sel = ColumnSelection.of([2, 0], 4)
    assert sel.indices == (0, 2)
    assert sel.complement().indices == (1, 3)
    assert sel.one_based() == [1, 3]
    assert sel.issubset(ColumnSelection((0, 1, 2), 4))
    with pytest.raises(ValueError):
        ColumnSelection((1, 1), 3)
    with pytest.raises(ValueError):
        ColumnSelection((3,), 3)
