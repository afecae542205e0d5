"""
Tests for input densities and score functions.
"""
import math

import numpy as np
import pytest
from scipy import integrate

from src.nnlift.errors import ConfigurationError, InvalidArgumentError
from src.nnlift.score import (
    GaussianDensity,
    GenericDensity,
    density,
    density_from_descriptor,
    gaussian_mixture,
    score_gaussian,
    score_recursive,
)
from src.nnlift.tensor_core import is_symmetric


def _fd_derivative(f, x, order, h):
    """Nested central differences of f; derivative indices come last."""
    if order == 0:
        return np.asarray(f(x), dtype=float)
    columns = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        columns.append(
            (_fd_derivative(f, x + step, order - 1, h) - _fd_derivative(f, x - step, order - 1, h)) / (2.0 * h)
        )
    return np.stack(columns, axis=-1)


def test_gaussian_density_values():
    assert density(GaussianDensity(dim=1), [0.0]) == pytest.approx(0.3989422804014327, abs=1e-15)
    assert density(GaussianDensity(dim=2), [0.0, 0.0]) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)


def test_gaussian_density_normalization():
    """Test the sigma_x = 2 value against numerically normalized quadrature."""
    mass, _ = integrate.quad(lambda t: math.exp(-t * t / 8.0), -np.inf, np.inf, epsabs=1e-14)
    expected = math.exp(-0.5) / mass
    assert density(GaussianDensity(dim=1, variance=4.0), [2.0]) == pytest.approx(expected, rel=1e-12)


def test_density_rejects_wrong_dimension():
    with pytest.raises(InvalidArgumentError):
        density(GaussianDensity(dim=2), [0.0, 0.0, 0.0])


def test_gaussian_score_at_origin():
    p = GaussianDensity(dim=3)
    x = np.zeros(3)
    assert np.array_equal(p.score(x, 1), np.zeros(3))
    assert np.allclose(p.score(x, 2), -np.eye(3))
    assert np.array_equal(p.score(x, 3), np.zeros((3, 3, 3)))


def test_gaussian_score_one_dimensional():
    p = GaussianDensity(dim=1)
    x = np.array([2.0])
    assert p.score(x, 2)[0, 0] == pytest.approx(3.0)
    assert p.score(x, 3)[0, 0, 0] == pytest.approx(2.0)


def test_gaussian_score_scaling(rng):
    """Test S_1(x; sigma) = S_1(x; 1) / sigma^2."""
    x = rng.standard_normal(3)
    assert np.allclose(GaussianDensity(dim=3, variance=4.0).score(x, 1), GaussianDensity(dim=3).score(x, 1) / 4.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_gaussian_score_matches_finite_differences(rng, order):
    """Test S_m = (-1)^m grad^m p / p with nested central differences."""
    p = GaussianDensity(dim=3)
    x = 0.7 * rng.standard_normal(3)
    derivative = _fd_derivative(p.pdf, x, order, 1e-3)
    expected = (-1) ** order * derivative / p.pdf(x)
    assert np.allclose(p.score(x, order), expected, atol=1e-5)


def test_gaussian_third_score_is_symmetric(rng):
    S3 = GaussianDensity(dim=4, variance=2.0).score(rng.standard_normal(4), 3)
    assert is_symmetric(S3, 1e-12)


def test_batched_scores_match_single_points(rng):
    p = GaussianDensity(dim=3, variance=1.5)
    X = rng.standard_normal((5, 3))
    batch = score_gaussian(p, X, 3)
    assert batch.batched
    for i in range(5):
        assert np.allclose(batch.value[i], p.score(X[i], 3), atol=1e-14)


def test_weighted_score_sum_matches_loop(rng):
    p = GaussianDensity(dim=3, variance=0.5)
    X = rng.standard_normal((7, 3))
    w = rng.standard_normal(7)
    for order in (1, 2, 3):
        expected = sum(w[i] * p.score(X[i], order) for i in range(7))
        assert np.allclose(p.weighted_score_sum(X, w, order), expected, atol=1e-12)


def test_recursive_scores_with_suppliers_match_closed_form(rng):
    p = GaussianDensity(dim=3, variance=2.0)
    generic = p.as_generic(analytic=True)
    x = rng.standard_normal(3)
    for order in (1, 2, 3):
        assert np.allclose(score_recursive(generic, x, order).value, p.score(x, order), atol=1e-12)


def test_recursive_scores_with_finite_differences(rng):
    p = GaussianDensity(dim=3)
    generic = p.as_generic(analytic=False)
    x = rng.standard_normal(3)
    for order in (2, 3):
        assert np.allclose(generic.score(x, order), p.score(x, order), atol=1e-6)


def test_quartic_density_recursion():
    """Test p ~ exp(-x^4/4): S_1 = x^3 and S_2 = x^6 - 3x^2."""
    quartic = GenericDensity(dim=1, grad_log=lambda x: -np.asarray(x) ** 3)
    x = np.array([1.3])
    assert quartic.score(x, 1)[0] == pytest.approx(1.3 ** 3)
    assert quartic.score(x, 2)[0, 0] == pytest.approx(1.3 ** 6 - 3 * 1.3 ** 2, rel=1e-6)


def test_even_density_has_odd_scores_zero_at_origin():
    quartic = GenericDensity(dim=1, grad_log=lambda x: -np.asarray(x) ** 3)
    origin = np.zeros(1)
    assert quartic.score(origin, 1)[0] == 0.0
    assert abs(quartic.score(origin, 3)[0, 0, 0]) <= 1e-12


def test_missing_derivative_supplier():
    p = GenericDensity(dim=1, grad_log=lambda x: -np.asarray(x), fd_step=None)
    assert p.score(np.ones(1), 1)[0] == 1.0
    with pytest.raises(ConfigurationError):
        p.score(np.ones(1), 2)


def test_unsupported_order():
    with pytest.raises(InvalidArgumentError):
        GaussianDensity(dim=2).score(np.zeros(2), 4)


def test_generic_density_without_pdf_or_peak():
    p = GenericDensity(dim=2, grad_log=lambda x: -np.asarray(x))
    with pytest.raises(ConfigurationError):
        p.pdf(np.zeros(2))
    with pytest.raises(ConfigurationError):
        p.peak()
    with pytest.raises(ConfigurationError):
        p.sample(3, np.random.default_rng(0))


def test_single_component_mixture_matches_gaussian(rng):
    mixture = gaussian_mixture([1.0], [[0.0, 0.0]], [1.5])
    p = GaussianDensity(dim=2, variance=1.5)
    x = rng.standard_normal(2)
    assert mixture.pdf(x) == pytest.approx(float(p.pdf(x)), rel=1e-12)
    assert mixture.peak() == pytest.approx(p.peak(), rel=1e-12)
    assert np.allclose(mixture.score(x, 1), p.score(x, 1), atol=1e-12)
    assert np.allclose(mixture.score(x, 2), p.score(x, 2), atol=1e-6)


def test_mixture_sampling_and_descriptor(rng):
    mixture = gaussian_mixture([1.0, 3.0], [[-1.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
    X = mixture.sample(1000, rng)
    assert X.shape == (1000, 2)
    rebuilt = density_from_descriptor(mixture.descriptor())
    x = np.array([0.3, -0.2])
    assert rebuilt.pdf(x) == pytest.approx(float(mixture.pdf(x)), rel=1e-12)
    assert mixture.descriptor().weights == [0.25, 0.75]


def test_gaussian_descriptor_round_trip():
    p = GaussianDensity(dim=4, variance=2.5)
    assert density_from_descriptor(p.descriptor()) == p


def test_invalid_gaussian():
    with pytest.raises(InvalidArgumentError):
        GaussianDensity(dim=0)
    with pytest.raises(InvalidArgumentError):
        GaussianDensity(dim=2, variance=0.0)


@pytest.mark.slow
def test_stein_identity_monte_carlo():
    """
    Test E[g(x) S_m(x)] = E[grad^m g(x)] for g(x) = cos(<w, x>).

    The per-entry difference must lie within four standard errors of zero.
    """
    p = GaussianDensity(dim=3)
    w = np.array([0.3, -0.2, 0.5])
    rng = np.random.default_rng(11)
    n, batch = 1_000_000, 100_000
    derivatives = {
        1: lambda X: -np.sin(X @ w)[:, None] * w,
        2: lambda X: -np.cos(X @ w)[:, None, None] * np.multiply.outer(w, w),
        3: lambda X: np.sin(X @ w)[:, None, None, None] * np.multiply.outer(np.multiply.outer(w, w), w),
    }
    for order, grad in derivatives.items():
        total = np.zeros((3,) * order)
        total_sq = np.zeros((3,) * order)
        for _ in range(n // batch):
            X = p.sample(batch, rng)
            g = np.cos(X @ w)
            h = g.reshape((-1,) + (1,) * order) * p.score(X, order) - grad(X)
            total += h.sum(axis=0)
            total_sq += (h * h).sum(axis=0)
        mean = total / n
        se = np.sqrt((total_sq / n - mean ** 2) / n)
        assert np.all(np.abs(mean) <= 4.0 * se + 1e-12)
