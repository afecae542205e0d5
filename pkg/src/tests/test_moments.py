"""
Tests for empirical moment accumulation and population moments.
"""
import numpy as np
import pytest

from src.nnlift.errors import InvalidArgumentError, StateError
from src.nnlift.models import Activation
from src.nnlift.moments import (
    MomentAccumulator,
    accumulate,
    accumulate_vector_output,
    contract_vector_output,
    exact_moments,
    finalize,
    moment_coefficients,
    shard_moments,
)
from src.nnlift.score import GaussianDensity
from src.nnlift.tensor_core import is_symmetric, symmetric_rank_sum


def test_single_sample_at_origin():
    p = GaussianDensity(dim=3)
    acc = accumulate(MomentAccumulator(dim=3), np.zeros(3), 1.0, p)
    M2, T = finalize(acc)
    assert np.allclose(M2, -np.eye(3))
    assert np.array_equal(T, np.zeros((3, 3, 3)))


def test_zero_labels_give_zero_moments(rng, gaussian3):
    X = rng.standard_normal((50, 3))
    M2, T = MomentAccumulator(dim=3).accumulate_batch(X, np.zeros(50), gaussian3).finalize()
    assert not M2.any()
    assert not T.any()


def test_single_sample_equals_its_summand(rng, gaussian3):
    x = rng.standard_normal(3)
    M2, T = finalize(accumulate(MomentAccumulator(dim=3), x, 2.5, gaussian3))
    assert np.allclose(M2, 2.5 * gaussian3.score(x, 2), atol=1e-14)
    assert np.allclose(T, 2.5 * gaussian3.score(x, 3), atol=1e-14)


def test_batch_matches_explicit_loop(rng, gaussian3):
    X = rng.standard_normal((100, 3))
    y = rng.standard_normal(100)
    M2, T = MomentAccumulator(dim=3).accumulate_batch(X, y, gaussian3, batch_size=16).finalize()
    expected_M2 = sum(y[i] * gaussian3.score(X[i], 2) for i in range(100)) / 100
    expected_T = sum(y[i] * gaussian3.score(X[i], 3) for i in range(100)) / 100
    assert np.allclose(M2, expected_M2, atol=1e-12)
    assert np.allclose(T, expected_T, atol=1e-12)
    assert is_symmetric(T, 1e-10)


def test_merge_matches_single_pass(rng, gaussian3):
    X = rng.standard_normal((200, 3))
    y = rng.standard_normal(200)
    whole = MomentAccumulator(dim=3).accumulate_batch(X, y, gaussian3).finalize()
    first = MomentAccumulator(dim=3).accumulate_batch(X[:90], y[:90], gaussian3)
    second = MomentAccumulator(dim=3).accumulate_batch(X[90:], y[90:], gaussian3)
    merged = first.merge(second)
    assert merged.count == 200
    for expected, actual in zip(whole, merged.finalize()):
        assert np.allclose(actual, expected, atol=1e-12)
    # Merging leaves both inputs untouched
    assert first.count == 90


def test_sharded_accumulation_matches_single_pass(rng, gaussian3):
    X = rng.standard_normal((301, 3))
    y = rng.standard_normal(301)
    whole = MomentAccumulator(dim=3).accumulate_batch(X, y, gaussian3).finalize()
    sharded = shard_moments(X, y, gaussian3, shards=3, workers=2).finalize()
    for expected, actual in zip(whole, sharded):
        assert np.allclose(actual, expected, atol=1e-12)


def test_empty_accumulator_cannot_finalize():
    with pytest.raises(StateError):
        MomentAccumulator(dim=2).finalize()


def test_dimension_checks(gaussian3):
    acc = MomentAccumulator(dim=3)
    with pytest.raises(InvalidArgumentError):
        acc.accumulate_batch(np.zeros((4, 2)), np.zeros(4), gaussian3)
    with pytest.raises(InvalidArgumentError):
        acc.accumulate_batch(np.zeros((4, 3)), np.zeros(3), gaussian3)
    with pytest.raises(InvalidArgumentError):
        acc.merge(MomentAccumulator(dim=2))


def test_vector_output_with_unit_theta(rng, gaussian3):
    """Test that a one-dimensional label with theta = 1 reproduces the scalar path."""
    X = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    scalar = MomentAccumulator(dim=3).accumulate_batch(X, y, gaussian3).finalize()[1]
    vector = contract_vector_output(X, y[:, None], [1.0], gaussian3)
    assert np.allclose(vector, scalar, atol=1e-14)


def test_vector_output_projection(rng, gaussian3):
    X = rng.standard_normal((40, 3))
    Y = rng.standard_normal((40, 2))
    first = MomentAccumulator(dim=3).accumulate_batch(X, Y[:, 0], gaussian3).finalize()[1]
    assert np.allclose(contract_vector_output(X, Y, [1.0, 0.0], gaussian3), first, atol=1e-14)
    assert not contract_vector_output(X, Y, [0.0, 0.0], gaussian3).any()
    acc = accumulate_vector_output(MomentAccumulator(dim=3), X, Y, [0.0, 1.0], gaussian3)
    assert acc.count == 40


def test_vector_output_theta_mismatch(rng, gaussian3):
    with pytest.raises(InvalidArgumentError):
        contract_vector_output(rng.standard_normal((5, 3)), rng.standard_normal((5, 2)), [1.0, 0.0, 0.0], gaussian3)


def test_step_coefficients_closed_form():
    A1 = np.eye(2)
    b1 = np.array([0.0, 0.5])
    a2 = np.array([1.0, -2.0])
    lam3, lam2 = moment_coefficients(A1, b1, a2, Activation.STEP, 1.0)
    phi = np.exp(-0.5 * b1 ** 2) / np.sqrt(2 * np.pi)
    assert np.allclose(lam3, a2 * (b1 ** 2 - 1) * phi)
    assert np.allclose(lam2, a2 * (-b1) * phi)


def test_exact_moments_structure(rng, unit_columns):
    A1 = unit_columns(rng, 4, 2)
    b1 = np.array([0.2, -0.6])
    a2 = np.array([0.9, -0.7])
    M2, T = exact_moments(A1, b1, a2, Activation.SIGMOID, 1.0)
    lam3, lam2 = moment_coefficients(A1, b1, a2, Activation.SIGMOID, 1.0)
    assert is_symmetric(T)
    assert np.allclose(M2, M2.T)
    assert np.allclose(T, symmetric_rank_sum(A1, lam3))
    assert np.linalg.matrix_rank(M2, tol=1e-10) == 2


@pytest.mark.slow
def test_empirical_moments_converge_to_population():
    """Test M2_hat and T_hat against their rank-k population forms within five standard errors per entry."""
    rng = np.random.default_rng(5)
    d, n, batch = 4, 1_000_000, 100_000
    A1 = rng.standard_normal((d, 2))
    A1 /= np.linalg.norm(A1, axis=0)
    b1 = np.array([0.3, -0.5])
    a2 = np.array([1.0, -0.8])
    M2_pop, T_pop = exact_moments(A1, b1, a2, Activation.SIGMOID, 1.0)

    p = GaussianDensity(dim=d)
    acc = MomentAccumulator(dim=d)
    total_sq = np.zeros((d, d, d))
    total_sq2 = np.zeros((d, d))
    for _ in range(n // batch):
        X = p.sample(batch, rng)
        y = 1.0 / (1.0 + np.exp(-(X @ A1 + b1))) @ a2
        acc.accumulate_batch(X, y, p)
        summands = y[:, None, None, None] * p.score(X, 3)
        total_sq += (summands ** 2).sum(axis=0)
        total_sq2 += ((y[:, None, None] * p.score(X, 2)) ** 2).sum(axis=0)
    M2_hat, T_hat = acc.finalize()
    se = np.sqrt((total_sq / n - T_hat ** 2) / n)
    assert np.all(np.abs(T_hat - T_pop) <= 5.0 * se)
    se2 = np.sqrt((total_sq2 / n - M2_hat ** 2) / n)
    assert np.all(np.abs(M2_hat - M2_pop) <= 5.0 * se2)
