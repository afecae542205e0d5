"""
Activation functions for two-layer networks.

Step, logistic sigmoid and a tanh rescaled to (0, 1) all satisfy
sigma(z) = 1 - sigma(-z). The linear activation exists only as a sanity
variant for featurization.
"""
import math

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError
from .models import Activation

_HERMITE_NODES, _HERMITE_WEIGHTS = np.polynomial.hermite_e.hermegauss(120)


def activate(activation: Activation, z: np.ndarray) -> np.ndarray:
    """
    Evaluate an activation elementwise.

    Args:
        activation: Activation identifier
        z: Pre-activations of any shape

    Returns:
        Array of the same shape as z
    """
    activation = Activation(activation)
    z = np.asarray(z, dtype=float)
    if activation is Activation.STEP:
        # sigma(0) = 1/2 keeps the reflection identity exact
        return np.heaviside(z, 0.5)
    if activation is Activation.SIGMOID:
        return expit(z)
    if activation is Activation.TANH:
        return expit(2.0 * z)
    return z.copy()


def _logistic_derivative(s: np.ndarray, order: int) -> np.ndarray:
    if order == 1:
        return s * (1.0 - s)
    if order == 2:
        return s * (1.0 - s) * (1.0 - 2.0 * s)
    if order == 3:
        return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)
    raise InvalidArgumentError(f"Unsupported derivative order: {order}")


def derivative(activation: Activation, z: np.ndarray, order: int) -> np.ndarray:
    """
    Evaluate the order-th derivative of a smooth activation.

    Raises:
        InvalidArgumentError: For the step function, whose derivatives are
            distributions, or for unsupported orders
    """
    activation = Activation(activation)
    z = np.asarray(z, dtype=float)
    if activation is Activation.STEP:
        raise InvalidArgumentError("The step function has no pointwise derivatives")
    if activation is Activation.LINEAR:
        return np.ones_like(z) if order == 1 else np.zeros_like(z)
    if activation is Activation.SIGMOID:
        return _logistic_derivative(expit(z), order)
    return (2.0 ** order) * _logistic_derivative(expit(2.0 * z), order)


def expected_derivative(activation: Activation, order: int, bias: float, scale: float) -> float:
    """
    Compute E[sigma^(order)(z)] for z ~ N(bias, scale^2).

    The step function uses the Dirac identities E[delta'(z)] = -p_z'(0) and
    E[delta''(z)] = p_z''(0); smooth activations use Gauss-Hermite quadrature.

    Args:
        activation: Activation identifier
        order: Derivative order (1, 2 or 3)
        bias: Mean of the pre-activation
        scale: Standard deviation of the pre-activation

    Returns:
        The expectation as a float
    """
    activation = Activation(activation)
    if scale <= 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")
    if activation is Activation.STEP:
        u = bias / scale
        phi = math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        if order == 1:
            return phi / scale
        if order == 2:
            return -u * phi / scale ** 2
        if order == 3:
            return (u * u - 1.0) * phi / scale ** 3
        raise InvalidArgumentError(f"Unsupported derivative order: {order}")
    values = derivative(activation, bias + scale * _HERMITE_NODES, order)
    return float(np.dot(_HERMITE_WEIGHTS, values) / math.sqrt(2.0 * math.pi))
