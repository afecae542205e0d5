"""
Input densities and their score functions.

S_m(x) = (-1)^m grad^m p(x) / p(x). Gaussians use closed forms; any other
density supplies grad log p and builds higher orders by the recursion
S_m = -S_{m-1} (x) grad log p - grad S_{m-1}.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .config import FD_RELATIVE_STEP, SUPPORTED_SCORE_ORDERS
from .errors import ConfigurationError, InvalidArgumentError
from .models import DensityDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreValue:
    """Score function of a given order; value has a leading batch axis when batched."""
    order: int
    value: np.ndarray

    @property
    def batched(self) -> bool:
        return self.value.ndim == self.order + 1


def _check_order(order: int) -> None:
    if order not in SUPPORTED_SCORE_ORDERS:
        raise InvalidArgumentError(f"Unsupported score order: {order}")


class Density(ABC):
    """Interface shared by all input densities."""

    dim: int

    def _points(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim not in (1, 2) or arr.shape[-1] != self.dim:
            raise InvalidArgumentError(f"Expected points of dimension {self.dim}, got shape {arr.shape}")
        return arr

    @abstractmethod
    def pdf(self, x) -> np.ndarray:
        """Density value at one point (d,) or a batch (n, d); may be unnormalized."""

    @abstractmethod
    def score(self, x, order: int) -> np.ndarray:
        """S_order at one point (d,) or a batch (n, d)."""

    @abstractmethod
    def peak(self) -> float:
        """Largest density value, on the same scale as pdf."""

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise ConfigurationError(f"{type(self).__name__} cannot draw samples")

    def descriptor(self) -> Optional[DensityDescriptor]:
        return None

    def weighted_score_sum(self, X, weights, order: int) -> np.ndarray:
        """
        Compute sum_i weights[i] * S_order(X[i]).

        Args:
            X: Batch of points (n, d)
            weights: Per-point weights (n,)
            order: Score order

        Returns:
            Array of shape (d,)*order
        """
        X = self._points(X)
        weights = np.asarray(weights, dtype=float)
        S = self.score(np.atleast_2d(X), order)
        return np.tensordot(weights, S, axes=(0, 0))


@dataclass(frozen=True)
class GaussianDensity(Density):
    """Isotropic N(0, variance * I_dim)."""
    dim: int
    variance: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        if not self.variance > 0:
            raise InvalidArgumentError(f"variance must be positive, got {self.variance}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, x) -> np.ndarray:
        x = self._points(x)
        sq = np.sum(x * x, axis=-1)
        norm = (2.0 * math.pi * self.variance) ** (-0.5 * self.dim)
        return norm * np.exp(-0.5 * sq / self.variance)

    def peak(self) -> float:
        return (2.0 * math.pi * self.variance) ** (-0.5 * self.dim)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sigma * rng.standard_normal((n, self.dim))

    def score(self, x, order: int) -> np.ndarray:
        _check_order(order)
        x = self._points(x)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        s2 = self.variance
        if order == 1:
            out = X / s2
        elif order == 2:
            out = np.einsum("ni,nj->nij", X, X) / s2 ** 2 - np.eye(self.dim) / s2
        else:
            eye = np.eye(self.dim)
            cubic = np.einsum("ni,nj,nl->nijl", X, X, X) / s2 ** 3
            correction = (
                X[:, :, None, None] * eye[None, None, :, :]
                + X[:, None, :, None] * eye[None, :, None, :]
                + X[:, None, None, :] * eye[None, :, :, None]
            )
            out = cubic - correction / s2 ** 2
        return out[0] if single else out

    def weighted_score_sum(self, X, weights, order: int) -> np.ndarray:
        _check_order(order)
        X = np.atleast_2d(self._points(X))
        w = np.asarray(weights, dtype=float)
        if w.shape != (X.shape[0],):
            raise InvalidArgumentError(f"Expected {X.shape[0]} weights, got shape {w.shape}")
        s2 = self.variance
        first = w @ X
        if order == 1:
            return first / s2
        eye = np.eye(self.dim)
        Xw = X * w[:, None]
        if order == 2:
            return Xw.T @ X / s2 ** 2 - w.sum() * eye / s2
        cubic = np.einsum("ni,nj,nl->ijl", Xw, X, X, optimize=True) / s2 ** 3
        correction = (
            np.einsum("i,jl->ijl", first, eye)
            + np.einsum("j,il->ijl", first, eye)
            + np.einsum("l,ij->ijl", first, eye)
        )
        return cubic - correction / s2 ** 2

    def descriptor(self) -> DensityDescriptor:
        return DensityDescriptor(kind="gaussian", dim=self.dim, variance=self.variance)

    def as_generic(self, analytic: bool = True) -> "GenericDensity":
        """
        Wrap this Gaussian as a GenericDensity.

        Args:
            analytic: Attach exact derivative suppliers; otherwise fall back to
                finite differences

        Returns:
            A GenericDensity with the same pdf and grad log p
        """
        s2 = self.variance
        eye = np.eye(self.dim)
        suppliers: Dict[int, Callable] = {}
        if analytic:
            suppliers = {
                2: lambda x: eye / s2,
                3: lambda x: (np.einsum("il,j->ijl", eye, x) + np.einsum("i,jl->ijl", x, eye)) / s2 ** 2,
            }
        return GenericDensity(
            dim=self.dim,
            grad_log=lambda x: -np.asarray(x, dtype=float) / s2,
            pdf_fn=self.pdf,
            derivative_suppliers=suppliers,
            peak_value=self.peak(),
            sampler=self.sample,
            vectorized=True,
        )


@dataclass(frozen=True)
class GenericDensity(Density):
    """
    Density known through grad log p.

    derivative_suppliers maps an order m to a callable returning grad S_{m-1}(x)
    with the derivative index last. Orders without a supplier use central
    differences with step fd_step * (1 + |x_i|); fd_step=None disables them.
    """
    dim: int
    grad_log: Callable[[np.ndarray], np.ndarray]
    pdf_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derivative_suppliers: Dict[int, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    fd_step: Optional[float] = FD_RELATIVE_STEP
    peak_value: Optional[float] = None
    sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None
    vectorized: bool = False
    record: Optional[DensityDescriptor] = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        if self.fd_step is not None and not self.fd_step > 0:
            raise InvalidArgumentError(f"fd_step must be positive, got {self.fd_step}")

    def pdf(self, x) -> np.ndarray:
        if self.pdf_fn is None:
            raise ConfigurationError("This density has no pointwise evaluator")
        x = self._points(x)
        if x.ndim == 1 or self.vectorized:
            return np.asarray(self.pdf_fn(x), dtype=float)
        return np.array([float(self.pdf_fn(row)) for row in x])

    def peak(self) -> float:
        if self.peak_value is None:
            raise ConfigurationError("This density has no known peak value")
        return float(self.peak_value)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is None:
            return super().sample(n, rng)
        return np.asarray(self.sampler(n, rng), dtype=float)

    def descriptor(self) -> Optional[DensityDescriptor]:
        return self.record

    def _grad_log(self, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self.grad_log(x), dtype=float)
        if g.shape != (self.dim,):
            raise InvalidArgumentError(f"grad_log returned shape {g.shape}, expected ({self.dim},)")
        return g

    def _gradient_of_score(self, x: np.ndarray, order: int) -> np.ndarray:
        supplier = self.derivative_suppliers.get(order)
        if supplier is not None:
            grad = np.asarray(supplier(x), dtype=float)
            expected = (self.dim,) * order
            if grad.shape != expected:
                raise InvalidArgumentError(f"Supplier for order {order} returned {grad.shape}, expected {expected}")
            return grad
        if self.fd_step is None:
            raise ConfigurationError(
                f"No derivative supplier for order {order} and finite differences are disabled"
            )
        columns = []
        for i in range(self.dim):
            h = self.fd_step * (1.0 + abs(x[i]))
            step = np.zeros(self.dim)
            step[i] = h
            forward = self._score_point(x + step, order - 1)
            backward = self._score_point(x - step, order - 1)
            columns.append((forward - backward) / (2.0 * h))
        return np.stack(columns, axis=-1)

    def _score_point(self, x: np.ndarray, order: int) -> np.ndarray:
        g = self._grad_log(x)
        if order == 1:
            return -g
        previous = self._score_point(x, order - 1)
        return -np.multiply.outer(previous, g) - self._gradient_of_score(x, order)

    def score(self, x, order: int) -> np.ndarray:
        _check_order(order)
        x = self._points(x)
        if x.ndim == 1:
            return self._score_point(x, order)
        if order == 1 and self.vectorized:
            return -np.asarray(self.grad_log(x), dtype=float)
        return np.stack([self._score_point(row, order) for row in x])


def density(p: Density, x) -> float:
    """
    Evaluate the density at a single point.

    Args:
        p: Input density
        x: Point of length p.dim

    Returns:
        The density value

    Raises:
        InvalidArgumentError: On dimension mismatch
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"Expected a single point, got shape {x.shape}")
    return float(p.pdf(x))


def score_gaussian(p: GaussianDensity, x, order: int) -> ScoreValue:
    """Closed-form Gaussian score S_order at x (single point or batch)."""
    return ScoreValue(order=order, value=p.score(x, order))


def score_recursive(p: GenericDensity, x, order: int) -> ScoreValue:
    """
    Score S_order built by the recursion from grad log p.

    Raises:
        ConfigurationError: If a needed derivative has neither a supplier nor a
            finite-difference step
    """
    return ScoreValue(order=order, value=p.score(x, order))


def gaussian_mixture(weights: Sequence[float], means, variances: Sequence[float]) -> GenericDensity:
    """
    Build a mixture of isotropic Gaussians as a GenericDensity.

    The pdf, grad log p and sampler are analytic; scores of order 2 and 3 come
    from the recursion with finite differences. The peak is taken as the largest
    density value over the component means.

    Args:
        weights: Mixing weights (normalized internally)
        means: Component means, shape (c, d)
        variances: Isotropic component variances, shape (c,)

    Returns:
        GenericDensity for the mixture
    """
    w = np.asarray(weights, dtype=float)
    mu = np.atleast_2d(np.asarray(means, dtype=float))
    var = np.asarray(variances, dtype=float)
    if w.ndim != 1 or mu.shape[0] != w.size or var.shape != w.shape:
        raise InvalidArgumentError("weights, means and variances must describe the same components")
    if np.any(w <= 0) or np.any(var <= 0):
        raise InvalidArgumentError("mixture weights and variances must be positive")
    w = w / w.sum()
    d = mu.shape[1]
    log_norm = np.log(w) - 0.5 * d * np.log(2.0 * math.pi * var)

    def _log_components(x: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(x)
        sq = np.sum((X[:, None, :] - mu[None, :, :]) ** 2, axis=-1)
        return log_norm[None, :] - 0.5 * sq / var[None, :]

    def pdf_fn(x):
        values = np.exp(logsumexp(_log_components(x), axis=1))
        return values[0] if np.asarray(x).ndim == 1 else values

    def grad_log(x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        log_c = _log_components(X)
        resp = np.exp(log_c - logsumexp(log_c, axis=1, keepdims=True))
        pulls = -(X[:, None, :] - mu[None, :, :]) / var[None, :, None]
        grads = np.einsum("nc,ncd->nd", resp, pulls)
        return grads[0] if np.asarray(x).ndim == 1 else grads

    def sampler(n: int, rng: np.random.Generator) -> np.ndarray:
        labels = rng.choice(w.size, size=n, p=w)
        return mu[labels] + np.sqrt(var[labels])[:, None] * rng.standard_normal((n, d))

    record = DensityDescriptor(
        kind="gaussian_mixture",
        dim=d,
        weights=w.tolist(),
        means=mu.tolist(),
        variances=var.tolist(),
    )
    logger.debug(f"Built {w.size}-component Gaussian mixture in dimension {d}")
    return GenericDensity(
        dim=d,
        grad_log=grad_log,
        pdf_fn=pdf_fn,
        peak_value=float(np.max(pdf_fn(mu))),
        sampler=sampler,
        vectorized=True,
        record=record,
    )


def density_from_descriptor(descriptor: DensityDescriptor) -> Density:
    """Rebuild a density from its serialized descriptor."""
    if descriptor.kind == "gaussian":
        return GaussianDensity(dim=descriptor.dim, variance=descriptor.variance or 1.0)
    if not (descriptor.weights and descriptor.means and descriptor.variances):
        raise ConfigurationError("A gaussian_mixture descriptor needs weights, means and variances")
    return gaussian_mixture(descriptor.weights, descriptor.means, descriptor.variances)
