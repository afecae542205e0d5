"""
Dense tensor algebra.

Third-order tensors are float64 numpy arrays of shape (d1, d2, d3) in C order,
so entry (i, j, l) sits at offset ((i * d2) + j) * d3 + l. All indices are
zero-based; the one-based formulas of the method are shifted by one.
"""
import itertools
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgumentError


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty vector, got shape {arr.shape}")
    return arr


def _matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


def as_tensor3(T, cubic: bool = False) -> np.ndarray:
    """
    Validate and convert an array to a third-order float64 tensor.

    Args:
        T: Array-like with three axes
        cubic: Require d1 = d2 = d3

    Returns:
        The tensor as a float64 numpy array

    Raises:
        InvalidArgumentError: If T is not third order (or not cubic when required)
    """
    arr = np.asarray(T, dtype=float)
    if arr.ndim != 3:
        raise InvalidArgumentError(f"Expected a third-order tensor, got shape {arr.shape}")
    if cubic and not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
        raise InvalidArgumentError(f"Expected a cubic tensor, got shape {arr.shape}")
    return arr


def outer3(a, b, c, w: float = 1.0) -> np.ndarray:
    """
    Weighted rank-1 tensor T(i,j,l) = w * a(i) * b(j) * c(l).

    Raises:
        InvalidArgumentError: If the vectors differ in length
    """
    a, b, c = _vector(a, "a"), _vector(b, "b"), _vector(c, "c")
    if not (a.size == b.size == c.size):
        raise InvalidArgumentError(f"Vector lengths differ: {a.size}, {b.size}, {c.size}")
    return w * np.einsum("i,j,l->ijl", a, b, c)


def matricize(T) -> np.ndarray:
    """Mode-1 unfolding M(i, l + j*d) = T(i, j, l) of a cubic tensor."""
    T = as_tensor3(T, cubic=True)
    d = T.shape[0]
    return T.reshape(d, d * d).copy()


def khatri_rao(A, B) -> np.ndarray:
    """
    Column-wise Kronecker product with C(l + i*d, j) = A(i, j) * B(l, j).

    Raises:
        InvalidArgumentError: If A and B differ in shape
    """
    A, B = _matrix(A, "A"), _matrix(B, "B")
    if A.shape != B.shape:
        raise InvalidArgumentError(f"Khatri-Rao needs equal shapes, got {A.shape} and {B.shape}")
    d, k = A.shape
    return (A[:, None, :] * B[None, :, :]).reshape(d * d, k)


def contract_mode1(T, u, v) -> np.ndarray:
    """Return T(I, u, v), the vector with entries sum_{j,l} u(j) v(l) T(i,j,l)."""
    T = as_tensor3(T)
    u, v = _vector(u, "u"), _vector(v, "v")
    if u.size != T.shape[1] or v.size != T.shape[2]:
        raise InvalidArgumentError(
            f"Contraction vectors of lengths {u.size}, {v.size} do not fit tensor {T.shape}"
        )
    return np.einsum("ijl,j,l->i", T, u, v)


def contract_mode3(T, theta) -> np.ndarray:
    """Return the matrix T(I, I, theta)."""
    T = as_tensor3(T)
    theta = _vector(theta, "theta")
    if theta.size != T.shape[2]:
        raise InvalidArgumentError(f"theta of length {theta.size} does not fit tensor {T.shape}")
    return np.einsum("ijl,l->ij", T, theta)


def tensor_apply(T, v) -> float:
    """Return the scalar T(v, v, v)."""
    T = as_tensor3(T, cubic=True)
    v = _vector(v, "v")
    if v.size != T.shape[0]:
        raise InvalidArgumentError(f"Vector of length {v.size} does not fit tensor {T.shape}")
    return float(np.einsum("ijl,i,j,l->", T, v, v, v))


def multilinear(T, W1, W2, W3) -> np.ndarray:
    """
    Multilinear form T(W1, W2, W3).

    Args:
        T: Tensor of shape (d1, d2, d3)
        W1, W2, W3: Matrices with d1, d2, d3 rows respectively

    Returns:
        Tensor of shape (p1, p2, p3) with entries
        sum_{i,j,l} T(i,j,l) W1(i,a) W2(j,b) W3(l,c)

    Raises:
        InvalidArgumentError: On row-count mismatch
    """
    T = as_tensor3(T)
    W1, W2, W3 = _matrix(W1, "W1"), _matrix(W2, "W2"), _matrix(W3, "W3")
    if (W1.shape[0], W2.shape[0], W3.shape[0]) != T.shape:
        raise InvalidArgumentError(
            f"Row counts {(W1.shape[0], W2.shape[0], W3.shape[0])} do not match tensor {T.shape}"
        )
    return np.einsum("ijl,ia,jb,lc->abc", T, W1, W2, W3, optimize=True)


def sixth_order_strides(d: int) -> tuple:
    """Element strides of a dense d^6 array stored in C order."""
    return tuple(d ** (5 - axis) for axis in range(6))


def tensorize_6_to_3(T6, d: Optional[int] = None) -> np.ndarray:
    """
    Regroup a sixth-order tensor into a third-order tensor on R^{d^2}.

    Entry (i1, i2, j1, j2, l1, l2) moves to (i2 + d*i1, j2 + d*j1, l2 + d*l1),
    so sum_j lambda_j a_j^{x6} becomes sum_j lambda_j (a_j kr a_j)^{x3}.

    Args:
        T6: Array of shape (d,)*6 or a flat array of length d^6
        d: Mode dimension, required for flat input

    Returns:
        Tensor of shape (d^2, d^2, d^2)

    Raises:
        InvalidArgumentError: If the six modes are not all of size d
    """
    arr = np.asarray(T6, dtype=float)
    if arr.ndim == 1:
        if d is None:
            raise InvalidArgumentError("A flat sixth-order tensor needs its dimension d")
        if arr.size != d ** 6:
            raise InvalidArgumentError(f"Flat tensor of size {arr.size} is not {d}^6")
        flat = arr
    else:
        if arr.ndim != 6 or len(set(arr.shape)) != 1:
            raise InvalidArgumentError(f"Expected six equal modes, got shape {arr.shape}")
        if d is not None and arr.shape[0] != d:
            raise InvalidArgumentError(f"Modes of size {arr.shape[0]} do not match d={d}")
        d = arr.shape[0]
        flat = np.ascontiguousarray(arr).ravel()
    # Offsets follow sixth_order_strides(d); the pair (x1, x2) maps to x2 + d*x1
    return flat.reshape(d * d, d * d, d * d).copy()


def outer_power(a, order: int, w: float = 1.0) -> np.ndarray:
    """Weighted symmetric rank-1 tensor w * a^{x order}."""
    a = _vector(a, "a")
    out = np.array(w, dtype=float)
    for _ in range(order):
        out = np.multiply.outer(out, a)
    return out


def symmetric_rank_sum(A, weights, order: int = 3) -> np.ndarray:
    """Return sum_j weights[j] * A[:, j]^{x order}."""
    A = _matrix(A, "A")
    weights = _vector(weights, "weights")
    if weights.size != A.shape[1]:
        raise InvalidArgumentError(f"{weights.size} weights for {A.shape[1]} columns")
    out = np.zeros((A.shape[0],) * order)
    for j in range(A.shape[1]):
        out += outer_power(A[:, j], order, weights[j])
    return out


def is_symmetric(T, tol: float = 1e-12) -> bool:
    """Check that T is unchanged under every permutation of its indices."""
    T = np.asarray(T, dtype=float)
    scale = max(1.0, float(np.max(np.abs(T)))) if T.size else 1.0
    return all(
        np.max(np.abs(T - np.transpose(T, perm))) <= tol * scale
        for perm in itertools.permutations(range(T.ndim))
    )


def frobenius(T: Union[np.ndarray, Sequence]) -> float:
    """Frobenius norm of an array of any order."""
    return float(np.linalg.norm(np.asarray(T, dtype=float).ravel()))
