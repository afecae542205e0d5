"""
Tests for whitening, the tensor power method and the CP decomposition.
"""
import numpy as np
import pytest

from src.nnlift.cp_decomposition import (
    decompose,
    decompose_overcomplete,
    deflate,
    fit_second_order_coefficients,
    power_iterate,
    second_moment_option2,
    svd_init,
    unwhiten,
    whiten,
)
from src.nnlift.errors import (
    DegenerateCoefficientError,
    DegenerateIterateError,
    IllConditionedMomentError,
    InvalidArgumentError,
)
from src.nnlift.models import PowerConfig, Whitening
from src.nnlift.pipeline import align
from src.nnlift.tensor_core import (
    frobenius,
    khatri_rao,
    multilinear,
    outer3,
    outer_power,
    symmetric_rank_sum,
)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def test_identity_whitening(rng):
    T = symmetric_rank_sum(rng.standard_normal((3, 2)), [1.0, 2.0])
    wt, T_white = whiten(np.eye(3), T, 3)
    assert np.allclose(wt.W.T @ wt.W, np.eye(3), atol=1e-12)
    assert np.allclose(wt.gamma, 1.0)
    assert frobenius(T_white) == pytest.approx(frobenius(T), rel=1e-12)
    assert not wt.indefinite


def test_whitened_components_are_orthonormal(rng, unit_columns):
    A = unit_columns(rng, 4, 3)
    M2 = A @ A.T
    T = symmetric_rank_sum(A, np.ones(3))
    wt, T_white = whiten(M2, T, 3)
    V = wt.W.T @ A
    assert np.linalg.norm(V.T @ V - np.eye(3)) <= 1e-8
    assert np.allclose(wt.W.T @ M2 @ wt.W, np.eye(3), atol=1e-10)
    assert np.allclose(T_white, multilinear(T, wt.W, wt.W, wt.W))


def test_whitening_of_indefinite_moment(rng, unit_columns):
    A = unit_columns(rng, 5, 3)
    M2 = symmetric_rank_sum(A, [1.0, -0.5, 2.0], order=2)
    wt, _ = whiten(M2, np.zeros((5, 5, 5)), 3)
    assert wt.indefinite
    assert np.allclose(wt.W.T @ M2 @ wt.W, np.diag(wt.signs), atol=1e-10)


def test_whitening_floor():
    with pytest.raises(IllConditionedMomentError) as excinfo:
        whiten(np.diag([1.0, 1.0, 1e-14]), np.zeros((3, 3, 3)), 3)
    assert abs(excinfo.value.eigenvalue) == pytest.approx(1e-14)


def test_whitening_rank_checks():
    with pytest.raises(InvalidArgumentError):
        whiten(np.eye(2), np.zeros((2, 2, 2)), 3)
    with pytest.raises(InvalidArgumentError):
        whiten(np.eye(3), np.zeros((2, 2, 2)), 1)


def test_second_moment_option2(rng):
    a = rng.standard_normal(4)
    theta = rng.standard_normal(4)
    M2 = second_moment_option2(outer_power(a, 3), theta)
    assert np.allclose(M2, np.dot(a, theta) * np.outer(a, a), atol=1e-12)
    assert not second_moment_option2(outer_power(a, 3), np.zeros(4)).any()


def test_svd_init_picks_dominant_component():
    T = outer3(E1, E1, E1, 5.0) + outer3(E2, E2, E2, 1.0)
    for seed in range(5):
        assert np.allclose(svd_init(T, 10, seed), E1, atol=1e-6)


def test_svd_init_one_dimensional():
    u = svd_init(np.full((1, 1, 1), 2.0), 3)
    assert abs(u[0]) == pytest.approx(1.0)


def test_power_iterate_single_component():
    T = outer3(E1, E1, E1, 3.0)
    v, mu = power_iterate(T, np.array([0.8, 0.6]), PowerConfig())
    assert np.allclose(v, E1, atol=1e-12)
    assert mu == pytest.approx(3.0)


def test_power_iterate_orthogonal_pair():
    T = outer3(E1, E1, E1, 3.0) + outer3(E2, E2, E2, 1.0)
    v, mu = power_iterate(T, np.array([0.8, 0.6]), PowerConfig())
    assert np.allclose(v, E1, atol=1e-8)
    assert mu == pytest.approx(3.0, abs=1e-8)
    v, mu = power_iterate(T, E2, PowerConfig())
    assert np.allclose(v, E2)
    assert mu == pytest.approx(1.0)


def test_power_iterate_errors():
    with pytest.raises(DegenerateIterateError):
        power_iterate(np.zeros((2, 2, 2)), E1, PowerConfig())
    with pytest.raises(InvalidArgumentError):
        power_iterate(outer3(E1, E1, E1), np.array([1.0, 1.0]), PowerConfig())


def test_deflate():
    T = outer3(E1, E1, E1, 3.0) + outer3(E2, E2, E2, 1.0)
    assert np.allclose(deflate(T, E1, 3.0), outer3(E2, E2, E2, 1.0))
    assert np.allclose(deflate(outer3(E1, E1, E1, 3.0), E1, 3.0), 0.0)
    with pytest.raises(InvalidArgumentError):
        deflate(T, 2 * E1, 1.0)


def test_unwhiten():
    T = np.zeros((2, 2, 2))
    wt, _ = whiten(np.eye(2), T, 2)
    v = np.array([0.6, 0.8])
    direction = unwhiten(wt, v, 1.0)
    assert np.allclose(np.abs(direction), np.abs(wt.U @ v))
    assert np.allclose(unwhiten(wt, -v, 1.0), -direction)
    with pytest.raises(DegenerateCoefficientError):
        unwhiten(wt, v, 1e-13)


def test_orthogonal_tensor_is_recovered_exactly(rng):
    V, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    mu = np.array([3.0, 2.0, 1.0])
    T = symmetric_rank_sum(V, mu)
    result = decompose(np.eye(3), T, 3, PowerConfig(seed=0))
    report = align(V, result.directions)
    assert report.max_error <= 1e-8
    assert np.allclose(np.sort(result.weights), np.sort(mu), atol=1e-8)
    residuals = [diag.residual_norm for diag in result.diagnostics]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(residuals, residuals[1:]))
    assert residuals[-1] <= 1e-8


def test_noiseless_recovery(synthetic_moments, power_config):
    A, lam2, lam3, M2, T = synthetic_moments
    result = decompose(M2, T, 4, power_config)
    report = align(A, result.directions)
    assert report.max_error <= 1e-6
    assert np.allclose(np.linalg.norm(result.directions, axis=0), 1.0)
    assert np.all(result.weights >= 0)
    perm = report.permutation
    assert np.allclose(result.coefficients[perm], lam2, atol=1e-6)
    assert np.allclose(result.third_order_coefficients[perm], lam3 * report.signs, atol=1e-6)


def test_indefinite_recovery(rng, unit_columns, power_config):
    """Test the signed power update on a mixed-sign second moment."""
    A = unit_columns(rng, 6, 4)
    lam2 = np.array([1.0, -1.5, 2.0, -0.8])
    lam3 = np.array([1.0, 2.0, 0.5, 1.5])
    result = decompose(symmetric_rank_sum(A, lam2, order=2), symmetric_rank_sum(A, lam3), 4, power_config)
    report = align(A, result.directions)
    assert report.max_error <= 1e-6
    assert result.whitening.indefinite
    assert result.warnings
    assert np.allclose(result.coefficients[report.permutation], lam2, atol=1e-6)


def test_contraction_whitening_recovery(synthetic_moments):
    A, lam2, _, M2, T = synthetic_moments
    result = decompose(M2, T, 4, PowerConfig(seed=0, whitening=Whitening.CONTRACTION))
    report = align(A, result.directions)
    assert report.max_error <= 1e-6
    assert np.allclose(result.coefficients[report.permutation], lam2, atol=1e-6)


def test_contraction_whitening_without_second_moment(synthetic_moments):
    A, _, _, _, T = synthetic_moments
    result = decompose(None, T, 4, PowerConfig(seed=0, whitening=Whitening.CONTRACTION))
    assert align(A, result.directions).max_error <= 1e-6
    assert result.second_order_ls is None


def test_score_whitening_needs_second_moment(synthetic_moments):
    with pytest.raises(InvalidArgumentError):
        decompose(None, synthetic_moments[4], 4, PowerConfig(seed=0))


def test_rank_beyond_numerical_rank(synthetic_moments, power_config):
    _, _, _, M2, T = synthetic_moments
    with pytest.raises(IllConditionedMomentError):
        decompose(M2, T, 5, power_config)


@pytest.mark.parametrize("whitening", [Whitening.CONTRACTION, Whitening.SCORE])
@pytest.mark.parametrize("k", [0, 7])
def test_rank_outside_dimension_is_rejected(synthetic_moments, whitening, k):
    _, _, _, M2, T = synthetic_moments
    with pytest.raises(InvalidArgumentError, match="1 <= k <= d"):
        decompose(M2, T, k, PowerConfig(seed=0, whitening=whitening))


def test_parallel_restarts_are_deterministic(synthetic_moments):
    _, _, _, M2, T = synthetic_moments
    serial = decompose(M2, T, 4, PowerConfig(seed=3, workers=1))
    parallel = decompose(M2, T, 4, PowerConfig(seed=3, workers=2))
    assert np.array_equal(serial.directions, parallel.directions)
    assert np.array_equal(serial.weights, parallel.weights)


def test_recovery_under_small_perturbation(rng, power_config):
    """Test that a relative tensor perturbation of 1e-4 moves columns by at most 1e-2."""
    A, _ = np.linalg.qr(rng.standard_normal((6, 4)))
    lam2 = np.array([1.0, 1.5, 2.0, 0.8])
    T = symmetric_rank_sum(A, [1.0, 2.0, 0.5, 1.5])
    noise = rng.standard_normal(T.shape)
    noise = sum(np.transpose(noise, perm) for perm in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)])
    eps = 1e-4
    noise *= eps * frobenius(T) / frobenius(noise)
    result = decompose(symmetric_rank_sum(A, lam2, order=2), T + noise, 4, power_config)
    assert align(A, result.directions).max_error <= 100 * eps


def test_fit_second_order_coefficients(synthetic_moments):
    A, lam2, _, M2, _ = synthetic_moments
    assert np.allclose(fit_second_order_coefficients(M2, A), lam2, atol=1e-10)


def test_overcomplete_recovery():
    """Test k = 6 > d = 3 components through the tensorized sixth-order moment."""
    rng = np.random.default_rng(8)
    d, k = 3, 6
    A = rng.standard_normal((d, k))
    A /= np.linalg.norm(A, axis=0)
    weights = np.linspace(1.0, 2.0, k)
    T6 = sum(outer_power(A[:, j], 6, weights[j]) for j in range(k))
    result = decompose_overcomplete(T6, d, k, PowerConfig(seed=0))
    assert align(khatri_rao(A, A), result.khatri_rao_columns).max_error <= 1e-5
    assert align(A, result.directions).max_error <= 1e-4


def test_overcomplete_rank_limit():
    with pytest.raises(InvalidArgumentError):
        decompose_overcomplete(np.zeros(2 ** 6), 2, 4)
