"""
Tests for the dense tensor algebra.
"""
import itertools

import numpy as np
import pytest

from src.nnlift.errors import InvalidArgumentError
from src.nnlift.tensor_core import (
    contract_mode1,
    contract_mode3,
    frobenius,
    is_symmetric,
    khatri_rao,
    matricize,
    multilinear,
    outer3,
    outer_power,
    sixth_order_strides,
    symmetric_rank_sum,
    tensor_apply,
    tensorize_6_to_3,
)


def test_outer3_entries():
    """Test that a weighted rank-1 tensor holds the product of the entries."""
    T = outer3([1, 2], [3, 4], [5, 6], w=1.0)
    assert T.shape == (2, 2, 2)
    # a(1) b(0) c(1) = 2 * 3 * 6
    assert T[1, 0, 1] == 36.0
    assert np.allclose(outer3([1, 2], [3, 4], [5, 6], w=-2.0), -2.0 * T)


def test_outer3_length_mismatch():
    with pytest.raises(InvalidArgumentError):
        outer3([1, 2], [3, 4, 5], [5, 6])


def test_matricize_row_layout():
    """Test the mode-1 unfolding against the one-based worked example."""
    d = 2
    T = np.zeros((d, d, d))
    for i, j, l in itertools.product(range(d), repeat=3):
        T[i, j, l] = 100 * (i + 1) + 10 * (j + 1) + (l + 1)
    M = matricize(T)
    assert M.shape == (2, 4)
    assert M[0].tolist() == [111, 112, 121, 122]


def test_matricize_preserves_norm(rng):
    T = rng.standard_normal((4, 4, 4))
    assert frobenius(matricize(T)) == pytest.approx(frobenius(T), rel=1e-14)


def test_matricize_rejects_non_cubic():
    with pytest.raises(InvalidArgumentError):
        matricize(np.zeros((2, 2, 3)))


def test_khatri_rao_example():
    C = khatri_rao([[1], [2]], [[3], [4]])
    assert C[:, 0].tolist() == [3, 4, 6, 8]


def test_khatri_rao_column_norms(rng):
    """Test ||(A kr B)_j|| = ||A_j|| ||B_j||."""
    A = rng.standard_normal((3, 5))
    B = rng.standard_normal((3, 5))
    C = khatri_rao(A, B)
    expected = np.linalg.norm(A, axis=0) * np.linalg.norm(B, axis=0)
    assert np.allclose(np.linalg.norm(C, axis=0), expected, rtol=1e-13)


def test_khatri_rao_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        khatri_rao(np.ones((3, 2)), np.ones((3, 3)))


def test_contractions_match_loops(rng):
    """Test the contractions against explicit loops."""
    d = 3
    T = rng.standard_normal((d, d, d))
    u, v, theta = rng.standard_normal((3, d))

    expected_vec = np.zeros(d)
    expected_mat = np.zeros((d, d))
    expected_scalar = 0.0
    for i, j, l in itertools.product(range(d), repeat=3):
        expected_vec[i] += T[i, j, l] * u[j] * v[l]
        expected_mat[i, j] += T[i, j, l] * theta[l]
        expected_scalar += T[i, j, l] * u[i] * u[j] * u[l]

    assert np.allclose(contract_mode1(T, u, v), expected_vec, atol=1e-12)
    assert np.allclose(contract_mode3(T, theta), expected_mat, atol=1e-12)
    assert tensor_apply(T, u) == pytest.approx(expected_scalar, abs=1e-12)


def test_contractions_reject_bad_lengths():
    T = np.zeros((2, 2, 2))
    with pytest.raises(InvalidArgumentError):
        contract_mode1(T, np.ones(3), np.ones(2))
    with pytest.raises(InvalidArgumentError):
        contract_mode3(T, np.ones(3))
    with pytest.raises(InvalidArgumentError):
        tensor_apply(T, np.ones(1))


def test_multilinear_matches_loops(rng):
    T = rng.standard_normal((3, 2, 4))
    W1 = rng.standard_normal((3, 2))
    W2 = rng.standard_normal((2, 2))
    W3 = rng.standard_normal((4, 3))

    expected = np.zeros((2, 2, 3))
    for a, b, c in itertools.product(range(2), range(2), range(3)):
        for i, j, l in itertools.product(range(3), range(2), range(4)):
            expected[a, b, c] += T[i, j, l] * W1[i, a] * W2[j, b] * W3[l, c]

    assert np.allclose(multilinear(T, W1, W2, W3), expected, atol=1e-12)


def test_multilinear_identity_is_noop(rng):
    T = rng.standard_normal((3, 3, 3))
    eye = np.eye(3)
    assert np.array_equal(multilinear(T, eye, eye, eye), T)


def test_multilinear_row_mismatch():
    with pytest.raises(InvalidArgumentError):
        multilinear(np.zeros((2, 2, 2)), np.eye(3), np.eye(2), np.eye(2))


def test_unfolding_agrees_with_mode1_contraction(rng):
    """Test T(I, u, v) = M(T) (u kr v) for the layouts of matricize and khatri_rao."""
    d = 4
    T = rng.standard_normal((d, d, d))
    u, v = rng.standard_normal((2, d))
    via_unfolding = matricize(T) @ khatri_rao(u[:, None], v[:, None])[:, 0]
    assert np.allclose(via_unfolding, contract_mode1(T, u, v), atol=1e-12)


def test_multilinear_keeps_symmetry(rng):
    T = symmetric_rank_sum(rng.standard_normal((5, 3)), [1.0, -2.0, 0.5])
    W = rng.standard_normal((5, 3))
    assert is_symmetric(T)
    assert is_symmetric(multilinear(T, W, W, W), tol=1e-10)


def test_orthonormal_change_of_basis_round_trip(rng):
    T = rng.standard_normal((4, 4, 4))
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    there = multilinear(T, Q, Q, Q)
    back = multilinear(there, Q.T, Q.T, Q.T)
    assert np.allclose(back, T, atol=1e-10)
    assert frobenius(there) == pytest.approx(frobenius(T), rel=1e-12)


def test_tensorize_delta_position():
    """Test the one-based example (2,1,4) for the delta at (1,2,1,1,2,2)."""
    d = 2
    T6 = np.zeros((d,) * 6)
    T6[0, 1, 0, 0, 1, 1] = 1.0
    T3 = tensorize_6_to_3(T6)
    assert T3.shape == (4, 4, 4)
    assert T3[1, 0, 3] == 1.0
    assert np.count_nonzero(T3) == 1


def test_tensorize_flat_input():
    d = 2
    T6 = np.arange(d ** 6, dtype=float)
    assert sixth_order_strides(d) == (32, 16, 8, 4, 2, 1)
    assert np.array_equal(tensorize_6_to_3(T6, d), tensorize_6_to_3(T6.reshape((d,) * 6)))
    with pytest.raises(InvalidArgumentError):
        tensorize_6_to_3(T6)
    with pytest.raises(InvalidArgumentError):
        tensorize_6_to_3(T6[:-1], d)


def test_tensorize_rank_one(rng):
    """Test that a^{x6} regroups into (a kr a)^{x3}."""
    a = rng.standard_normal(3)
    T3 = tensorize_6_to_3(outer_power(a, 6, 2.0))
    aa = khatri_rao(a[:, None], a[:, None])[:, 0]
    assert np.allclose(T3, outer_power(aa, 3, 2.0), atol=1e-12)
    assert frobenius(T3) == pytest.approx(frobenius(outer_power(a, 6, 2.0)), rel=1e-13)


def test_symmetric_rank_sum(rng):
    A = rng.standard_normal((4, 3))
    T = symmetric_rank_sum(A, [1.0, -2.0, 0.5])
    assert is_symmetric(T)
    expected = sum(w * outer3(A[:, j], A[:, j], A[:, j]) for j, w in enumerate([1.0, -2.0, 0.5]))
    assert np.allclose(T, expected, atol=1e-12)
    assert not is_symmetric(rng.standard_normal((3, 3, 3)))
