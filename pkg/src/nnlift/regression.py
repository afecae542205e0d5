"""
Ridge regression of labels on estimated hidden-layer features.

Solves (Sigma_h + lambda I) beta = (1/n) sum_i y_i h_i with h_i = [sigma(A1^T x_i + b1); 1].
The intercept column is penalized along with the output weights.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .activations import activate
from .config import DEFAULT_HOLDOUT_FRACTION, DEFAULT_LAMBDA_MULTIPLIERS
from .errors import InvalidArgumentError, SingularDesignError
from .models import Activation

logger = logging.getLogger(__name__)

SINGULAR_RELATIVE_EIGENVALUE = 1e-12


@dataclass
class RidgeFit:
    """Ridge solution; a2 in the first k entries of beta, b2 last."""
    beta: np.ndarray
    lam: float
    holdout_mse: Optional[float] = None
    path: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def a2(self) -> np.ndarray:
        return self.beta[:-1]

    @property
    def b2(self) -> float:
        return float(self.beta[-1])

    def predict(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.beta


def featurize(x, A1_hat, b1_hat, activation) -> np.ndarray:
    """
    Hidden-layer features with a trailing constant.

    Args:
        x: One input (d,) or a batch (n, d)
        A1_hat: Directions (d, k)
        b1_hat: Biases (k,)
        activation: Activation identifier

    Returns:
        (k+1,) or (n, k+1) features
    """
    x = np.asarray(x, dtype=float)
    A1_hat = np.asarray(A1_hat, dtype=float)
    b1_hat = np.asarray(b1_hat, dtype=float)
    if A1_hat.ndim != 2 or x.shape[-1] != A1_hat.shape[0] or b1_hat.shape != (A1_hat.shape[1],):
        raise InvalidArgumentError(
            f"Inconsistent shapes: x {x.shape}, A1 {A1_hat.shape}, b1 {b1_hat.shape}"
        )
    hidden = activate(Activation(activation), x @ A1_hat + b1_hat)
    ones = np.ones(hidden.shape[:-1] + (1,))
    return np.concatenate([hidden, ones], axis=-1)


def _normal_equations(features: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = features.shape[0]
    return features.T @ features / n, features.T @ y / n


def ridge(features, y, lam: float) -> RidgeFit:
    """
    Solve the ridge normal equations by Cholesky factorization.

    Raises:
        InvalidArgumentError: On empty data or negative lambda
        SingularDesignError: If the system is singular at lambda = 0
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(y, dtype=float)
    if features.shape[0] < 1 or y.shape != (features.shape[0],):
        raise InvalidArgumentError(f"Need matching non-empty features and labels, got {features.shape} and {y.shape}")
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be non-negative, got {lam}")
    gram, rhs = _normal_equations(features, y)
    system = gram + lam * np.eye(gram.shape[0])
    if lam == 0:
        eigenvalues = linalg.eigvalsh(gram)
        if eigenvalues[0] <= SINGULAR_RELATIVE_EIGENVALUE * max(eigenvalues[-1], 1e-300):
            raise SingularDesignError("Feature covariance is singular; use a positive lambda")
    try:
        factor = linalg.cho_factor(system, lower=True)
    except linalg.LinAlgError as e:
        raise SingularDesignError(f"Cholesky factorization failed at lambda={lam}: {e}") from e
    return RidgeFit(beta=linalg.cho_solve(factor, rhs), lam=float(lam))


def default_lambda_grid(features, multipliers: Sequence[float] = DEFAULT_LAMBDA_MULTIPLIERS) -> List[float]:
    """Multipliers scaled by trace(Sigma_h) / (k + 1)."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    scale = float(np.sum(features * features)) / features.shape[0] / features.shape[1]
    return [float(m) * scale for m in multipliers]


def select_lambda(
    features,
    y,
    grid: Optional[Sequence[float]] = None,
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    seed: int = 0,
    multipliers: Sequence[float] = DEFAULT_LAMBDA_MULTIPLIERS,
) -> RidgeFit:
    """
    Choose lambda by holdout error and refit on all samples.

    Args:
        features: Design matrix (n, k+1)
        y: Labels (n,)
        grid: Absolute lambda values; the scaled default grid when None
        holdout_fraction: Share of samples held out
        seed: Seed of the holdout split
        multipliers: Grid multipliers used when grid is None

    Returns:
        RidgeFit refit on all samples, with the holdout MSE of the chosen lambda
        and the (lambda, holdout MSE) path

    Raises:
        InvalidArgumentError: If the grid or either split is empty
        SingularDesignError: If no lambda yields a solvable system
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(y, dtype=float)
    n = features.shape[0]
    n_hold = int(round(holdout_fraction * n))
    if n_hold < 1 or n_hold >= n:
        raise InvalidArgumentError(f"Holdout of {n_hold} out of {n} samples leaves an empty split")
    order = np.random.default_rng(seed).permutation(n)
    hold, train = order[:n_hold], order[n_hold:]
    if grid is None:
        grid = default_lambda_grid(features[train], multipliers)
    grid = sorted(float(lam) for lam in grid)
    if not grid:
        raise InvalidArgumentError("lambda grid must not be empty")

    path = []
    for lam in grid:
        try:
            fit = ridge(features[train], y[train], lam)
        except SingularDesignError as e:
            logger.debug(f"Skipping lambda={lam:.3g}: {e}")
            continue
        residual = y[hold] - fit.predict(features[hold])
        path.append((lam, float(np.mean(residual * residual))))
    if not path:
        raise SingularDesignError("Every lambda in the grid gave a singular system")
    # Ties go to the larger lambda
    best_lam, best_mse = min(path, key=lambda item: (item[1], -item[0]))
    logger.info(f"Selected lambda={best_lam:.3g} with holdout MSE {best_mse:.4g}")
    final = ridge(features, y, best_lam)
    final.holdout_mse = best_mse
    final.path = path
    return final
