"""
Empirical cross-moments between labels and score functions.

M2 = (1/n) sum y_i S_2(x_i) and T = (1/n) sum y_i S_3(x_i), accumulated in
mini-batches with compensated summation. Accumulators merge, so samples can be
sharded across workers.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .activations import expected_derivative
from .config import DEFAULT_BATCH_SIZE
from .errors import InvalidArgumentError, StateError
from .score import Density
from .tensor_core import symmetric_rank_sum

logger = logging.getLogger(__name__)


def _kahan_add(total: np.ndarray, compensation: np.ndarray, value: np.ndarray) -> None:
    y = value - compensation
    t = total + y
    compensation[...] = (t - total) - y
    total[...] = t


@dataclass
class MomentAccumulator:
    """Running sums of y * S_2(x) and y * S_3(x)."""
    dim: int
    count: int = 0
    m2_sum: np.ndarray = field(default=None, repr=False)
    m2_comp: np.ndarray = field(default=None, repr=False)
    t3_sum: np.ndarray = field(default=None, repr=False)
    t3_comp: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        d = self.dim
        for name, shape in (("m2_sum", (d, d)), ("m2_comp", (d, d)), ("t3_sum", (d, d, d)), ("t3_comp", (d, d, d))):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape))

    def accumulate_batch(self, X, y, density: Density, batch_size: int = DEFAULT_BATCH_SIZE) -> "MomentAccumulator":
        """
        Add a batch of samples.

        Args:
            X: Inputs of shape (n, d)
            y: Scalar labels of shape (n,)
            density: Input density providing S_2 and S_3
            batch_size: Rows per compensated partial sum

        Returns:
            self, for chaining

        Raises:
            InvalidArgumentError: On shape mismatch
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if X.shape[1] != self.dim or density.dim != self.dim:
            raise InvalidArgumentError(f"Expected inputs of dimension {self.dim}, got {X.shape[1]}")
        if y.shape != (X.shape[0],):
            raise InvalidArgumentError(f"Expected {X.shape[0]} scalar labels, got shape {y.shape}")
        for start in range(0, X.shape[0], batch_size):
            Xb, yb = X[start:start + batch_size], y[start:start + batch_size]
            _kahan_add(self.m2_sum, self.m2_comp, density.weighted_score_sum(Xb, yb, 2))
            _kahan_add(self.t3_sum, self.t3_comp, density.weighted_score_sum(Xb, yb, 3))
        self.count += X.shape[0]
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Return a new accumulator holding the samples of both."""
        if other.dim != self.dim:
            raise InvalidArgumentError(f"Cannot merge dimensions {self.dim} and {other.dim}")
        merged = MomentAccumulator(
            dim=self.dim,
            count=self.count,
            m2_sum=self.m2_sum.copy(),
            m2_comp=self.m2_comp.copy(),
            t3_sum=self.t3_sum.copy(),
            t3_comp=self.t3_comp.copy(),
        )
        _kahan_add(merged.m2_sum, merged.m2_comp, other.m2_sum - other.m2_comp)
        _kahan_add(merged.t3_sum, merged.t3_comp, other.t3_sum - other.t3_comp)
        merged.count += other.count
        return merged

    def finalize(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Divide the sums by the sample count.

        Raises:
            StateError: If nothing has been accumulated
        """
        if self.count < 1:
            raise StateError("Cannot finalize an empty moment accumulator")
        M2 = (self.m2_sum - self.m2_comp) / self.count
        T = (self.t3_sum - self.t3_comp) / self.count
        return M2, T


def accumulate(acc: MomentAccumulator, x, y: float, density: Density) -> MomentAccumulator:
    """Add a single labeled sample to the accumulator."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"Expected a single point, got shape {x.shape}")
    return acc.accumulate_batch(x[None, :], np.array([float(y)]), density)


def finalize(acc: MomentAccumulator) -> Tuple[np.ndarray, np.ndarray]:
    """Return (M2_hat, T_hat)."""
    return acc.finalize()


def _projected_labels(Y, theta) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size != Y.shape[1]:
        raise InvalidArgumentError(f"theta of length {theta.size} does not match label dimension {Y.shape[1]}")
    return Y @ theta


def accumulate_vector_output(acc: MomentAccumulator, X, Y, theta, density: Density) -> MomentAccumulator:
    """Accumulate <y, theta> * S(x) for vector labels without forming the fourth-order moment."""
    return acc.accumulate_batch(X, _projected_labels(Y, theta), density)


def contract_vector_output(X, Y, theta, density: Density, batch_size: int = DEFAULT_BATCH_SIZE) -> np.ndarray:
    """
    Third-order moment of vector labels contracted along the label mode by theta.

    Args:
        X: Inputs (n, d)
        Y: Labels (n, d_y) or (n,)
        theta: Contraction vector of length d_y
        density: Input density

    Returns:
        Tensor (1/n) sum <y_i, theta> S_3(x_i)

    Raises:
        InvalidArgumentError: If theta does not match the label dimension
    """
    acc = MomentAccumulator(dim=density.dim)
    acc.accumulate_batch(X, _projected_labels(Y, theta), density, batch_size)
    return acc.finalize()[1]


def shard_moments(
    X,
    y,
    density: Density,
    shards: int = 1,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MomentAccumulator:
    """
    Accumulate moments over contiguous shards and merge them in shard order.

    Args:
        X: Inputs (n, d)
        y: Scalar labels (n,)
        density: Input density
        shards: Number of contiguous shards
        workers: Thread pool size
        batch_size: Rows per compensated partial sum

    Returns:
        The merged accumulator
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    shards = max(1, min(shards, X.shape[0]))
    bounds = np.linspace(0, X.shape[0], shards + 1).astype(int)

    def _run(index: int) -> MomentAccumulator:
        lo, hi = bounds[index], bounds[index + 1]
        return MomentAccumulator(dim=density.dim).accumulate_batch(X[lo:hi], y[lo:hi], density, batch_size)

    if workers > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run, range(shards)))
    else:
        parts = [_run(index) for index in range(shards)]
    merged = parts[0]
    for part in parts[1:]:
        merged = merged.merge(part)
    logger.info(f"Accumulated moments over {merged.count} samples in {shards} shard(s)")
    return merged


def moment_coefficients(A1, b1, a2, activation, sigma_x: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients of the rank-1 expansions of the population moments.

    For unit columns, z_j = <a_j, x> + b_j ~ N(b_j, sigma_x^2), and
    lambda_j = a2_j E[sigma'''(z_j)], lambda~_j = a2_j E[sigma''(z_j)].

    Returns:
        (lam3, lam2) as arrays of length k
    """
    A1 = np.asarray(A1, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    scales = sigma_x * np.linalg.norm(A1, axis=0)
    lam3 = np.array([a2[j] * expected_derivative(activation, 3, b1[j], scales[j]) for j in range(a2.size)])
    lam2 = np.array([a2[j] * expected_derivative(activation, 2, b1[j], scales[j]) for j in range(a2.size)])
    return lam3, lam2


def exact_moments(A1, b1, a2, activation, sigma_x: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Population moments (M2, T) of a network under N(0, sigma_x^2 I) inputs.

    Args:
        A1, b1, a2: Network parameters (unit columns)
        activation: Activation identifier
        sigma_x: Input standard deviation

    Returns:
        (sum_j lambda~_j a_j a_j^T, sum_j lambda_j a_j^{x3})
    """
    lam3, lam2 = moment_coefficients(A1, b1, a2, activation, sigma_x)
    A1 = np.asarray(A1, dtype=float)
    return symmetric_rank_sum(A1, lam2, order=2), symmetric_rank_sum(A1, lam3, order=3)
