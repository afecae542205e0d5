"""
Whitened CP decomposition of symmetric third-order moments.

The pipeline is whiten -> (SVD-initialized restarts of the tensor power method,
refinement, deflation) per component -> un-whiten. When the paired second
moment is indefinite the whitening signs S are kept and the power update
v <- T(I, Sv, Sv) is used; it reduces to the usual update when S = I.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from .config import COEFFICIENT_FLOOR, DEGENERATE_ITERATE_NORM, EIGENVALUE_FLOOR
from .errors import (
    DegenerateCoefficientError,
    DegenerateIterateError,
    IllConditionedMomentError,
    InvalidArgumentError,
    NNLiftError,
)
from .models import PowerConfig, Whitening
from .tensor_core import as_tensor3, contract_mode3, frobenius, multilinear, outer3, tensorize_6_to_3

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WhiteningTransform:
    """Rank-k whitening map built from the top eigenpairs of M2."""
    W: np.ndarray
    U: np.ndarray
    gamma: np.ndarray
    signs: np.ndarray

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    @property
    def indefinite(self) -> bool:
        return bool(np.any(self.signs < 0))


@dataclass
class ComponentDiagnostics:
    """Bookkeeping for one extracted component."""
    index: int
    weight: float
    iterations: int
    restarts: int
    failed_restarts: int
    residual_norm: float


@dataclass
class DecompositionResult:
    """Recovered unit directions with their moment coefficients."""
    directions: np.ndarray
    weights: np.ndarray
    coefficients: np.ndarray
    third_order_coefficients: np.ndarray
    whitening: WhiteningTransform
    diagnostics: List[ComponentDiagnostics] = field(default_factory=list)
    second_order_ls: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.directions.shape[1]


@dataclass
class OvercompleteResult:
    """Tensorized decomposition: Khatri-Rao columns and the extracted directions."""
    khatri_rao_columns: np.ndarray
    directions: np.ndarray
    decomposition: DecompositionResult


def _orient_columns(U: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def whiten(M2, T, k: int, floor: float = EIGENVALUE_FLOOR) -> Tuple[WhiteningTransform, np.ndarray]:
    """
    Whiten a third-order moment against a paired second-order moment.

    Args:
        M2: Symmetric (d, d) matrix
        T: Tensor (d, d, d)
        k: Target rank
        floor: Smallest admissible |eigenvalue| among the top k

    Returns:
        (WhiteningTransform, T(W, W, W))

    Raises:
        IllConditionedMomentError: If the k-th largest |eigenvalue| is below floor
        InvalidArgumentError: On shape mismatch or k > d
    """
    M2 = np.asarray(M2, dtype=float)
    T = as_tensor3(T, cubic=True)
    d = T.shape[0]
    if M2.shape != (d, d):
        raise InvalidArgumentError(f"M2 of shape {M2.shape} does not pair with tensor {T.shape}")
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"Rank {k} must lie in [1, {d}]")
    gamma, vectors = linalg.eigh(0.5 * (M2 + M2.T))
    order = np.argsort(-np.abs(gamma), kind="stable")[:k]
    gamma, U = gamma[order], _orient_columns(vectors[:, order])
    if abs(gamma[-1]) < floor:
        raise IllConditionedMomentError(
            f"Eigenvalue {k} of M2 has magnitude {abs(gamma[-1]):.3e}, below the floor {floor:.1e}",
            eigenvalue=float(gamma[-1]),
        )
    signs = np.where(gamma < 0, -1.0, 1.0)
    W = U / np.sqrt(np.abs(gamma))
    return WhiteningTransform(W=W, U=U, gamma=gamma, signs=signs), multilinear(T, W, W, W)


def second_moment_option2(T, theta) -> np.ndarray:
    """Paired second moment M2 = T(I, I, theta)."""
    return contract_mode3(T, theta)


def _top_left_singular(M: np.ndarray) -> np.ndarray:
    U, _, _ = np.linalg.svd(M)
    return U[:, 0]


def _objective(T: np.ndarray, v: np.ndarray) -> float:
    return float(np.einsum("ijl,i,j,l->", T, v, v, v))


def svd_candidates(T_white, trials: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Top left singular vectors of T(I, I, theta) for standard normal theta draws."""
    T_white = as_tensor3(T_white, cubic=True)
    if trials < 1:
        raise InvalidArgumentError(f"trials must be positive, got {trials}")
    k = T_white.shape[0]
    candidates = []
    for _ in range(trials):
        u = _top_left_singular(contract_mode3(T_white, rng.standard_normal(k)))
        candidates.append(u if _objective(T_white, u) >= 0 else -u)
    return candidates


def svd_init(T_white, trials: int, seed: int = 0) -> np.ndarray:
    """
    SVD-based initialization.

    Args:
        T_white: Whitened tensor (k, k, k)
        trials: Number of random contractions
        seed: RNG seed

    Returns:
        The candidate with the largest |T(u, u, u)|, signed so that T(u, u, u) >= 0
    """
    T_white = as_tensor3(T_white, cubic=True)
    candidates = svd_candidates(T_white, trials, np.random.default_rng(seed))
    return max(candidates, key=lambda u: abs(_objective(T_white, u)))


def _metric(signs: Optional[np.ndarray], k: int) -> np.ndarray:
    return np.ones(k) if signs is None else np.asarray(signs, dtype=float)


def _iterate(T: np.ndarray, v0: np.ndarray, n_iter: int, tol: float, signs: np.ndarray) -> Tuple[np.ndarray, int]:
    v = v0 / np.linalg.norm(v0)
    for step in range(1, n_iter + 1):
        sv = signs * v
        update = np.einsum("ijl,j,l->i", T, sv, sv)
        norm = np.linalg.norm(update)
        if norm < DEGENERATE_ITERATE_NORM:
            raise DegenerateIterateError(f"Power iterate collapsed (norm {norm:.2e}) at step {step}")
        previous, v = v, update / norm
        if abs(1.0 - float(np.dot(v, previous))) < tol:
            return v, step
    return v, n_iter


def _component_weight(T: np.ndarray, v: np.ndarray, signs: np.ndarray) -> Tuple[float, float]:
    """Euclidean weight of v^{x3} in T and the squared metric norm v^T S v."""
    sigma = float(np.dot(v, signs * v))
    if abs(sigma) < DEGENERATE_ITERATE_NORM:
        raise DegenerateIterateError("Iterate is isotropic under the whitening signs")
    sv = signs * v
    weight = np.sign(sigma) * _objective(T, sv) / abs(sigma) ** 3
    return float(weight), sigma


def power_iterate(T_white, v0, cfg: PowerConfig, signs=None) -> Tuple[np.ndarray, float]:
    """
    Robust tensor power iteration from a given start.

    Args:
        T_white: Whitened tensor (k, k, k)
        v0: Unit start vector
        cfg: Iteration count and tolerance
        signs: Whitening signs; None for a PSD whitening

    Returns:
        (v, mu) with unit v and mu the weight of v^{x3} (T(v, v, v) when signs is None)

    Raises:
        InvalidArgumentError: If v0 is not a unit vector of length k
        DegenerateIterateError: If an update has norm below 1e-14
    """
    T_white = as_tensor3(T_white, cubic=True)
    v0 = np.asarray(v0, dtype=float)
    k = T_white.shape[0]
    if v0.shape != (k,) or abs(np.linalg.norm(v0) - 1.0) > 1e-8:
        raise InvalidArgumentError("v0 must be a unit vector matching the tensor")
    metric = _metric(signs, k)
    v, _ = _iterate(T_white, v0, cfg.n_iter, cfg.tol, metric)
    mu, _ = _component_weight(T_white, v, metric)
    return v, mu


def deflate(T_white, v, mu: float) -> np.ndarray:
    """Return T - mu * v^{x3} as a new tensor."""
    T_white = as_tensor3(T_white, cubic=True)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise InvalidArgumentError("Deflation needs a unit vector")
    return T_white - outer3(v, v, v, mu)


def unwhiten(wt: WhiteningTransform, v, lam2: float) -> np.ndarray:
    """
    Map a whitened component back to a unit direction in the input space.

    Raises:
        DegenerateCoefficientError: If |lam2| is below the coefficient floor
    """
    if abs(lam2) < COEFFICIENT_FLOOR:
        raise DegenerateCoefficientError(f"Second-order coefficient {lam2:.3e} is too small to un-whiten")
    direction = wt.U @ (np.sqrt(np.abs(wt.gamma)) * np.asarray(v, dtype=float)) / np.sqrt(abs(lam2))
    return direction / np.linalg.norm(direction)


def _implied_coefficients(wt: WhiteningTransform, v: np.ndarray, mu: float, sigma: float) -> Tuple[float, float]:
    """Second- and third-order coefficients implied by a whitened component."""
    back = wt.U @ (np.sqrt(np.abs(wt.gamma)) * v)
    lam2 = np.sign(sigma) * float(back @ back) / abs(sigma)
    lam3 = mu * abs(lam2) ** 1.5 * abs(sigma) ** 1.5
    return lam2, lam3


def fit_second_order_coefficients(M2, directions) -> np.ndarray:
    """Least-squares c minimizing ||M2 - sum_j c_j a_j a_j^T||_F."""
    M2 = np.asarray(M2, dtype=float)
    A = np.asarray(directions, dtype=float)
    design = np.stack([np.outer(A[:, j], A[:, j]).ravel() for j in range(A.shape[1])], axis=1)
    coeffs, *_ = linalg.lstsq(design, M2.ravel())
    return coeffs


def _choose_theta(T: np.ndarray, k: int, rng: np.random.Generator, trials: int) -> np.ndarray:
    """Standard normal theta whose contraction has the best-conditioned rank-k spectrum."""
    best, best_ratio = None, -1.0
    for _ in range(trials):
        theta = rng.standard_normal(T.shape[0])
        magnitudes = np.sort(np.abs(linalg.eigvalsh(second_moment_option2(T, theta))))[::-1]
        ratio = magnitudes[k - 1] / magnitudes[0] if magnitudes[0] > 0 else 0.0
        if ratio > best_ratio:
            best, best_ratio = theta, ratio
    logger.debug(f"Contraction vector chosen with eigenvalue ratio {best_ratio:.3g}")
    return best


def _run_restart(T: np.ndarray, v0: np.ndarray, cfg: PowerConfig, metric: np.ndarray):
    try:
        v, steps = _iterate(T, v0, cfg.n_iter, cfg.tol, metric)
        mu, sigma = _component_weight(T, v, metric)
    except DegenerateIterateError as e:
        logger.debug(f"Restart degenerated: {e}")
        return None
    if mu < 0:
        v, mu = -v, -mu
    return v, mu, abs(sigma) ** 1.5 * mu, steps


def _extract_component(T: np.ndarray, cfg: PowerConfig, restarts: int, metric: np.ndarray, rng: np.random.Generator):
    starts = svd_candidates(T, restarts, rng)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(lambda v0: _run_restart(T, v0, cfg, metric), starts))
    else:
        outcomes = [_run_restart(T, v0, cfg, metric) for v0 in starts]
    survivors = [outcome for outcome in outcomes if outcome is not None]
    if not survivors:
        raise DegenerateIterateError(f"All {restarts} restarts degenerated")
    best = max(survivors, key=lambda outcome: outcome[2])
    v, steps = _iterate(T, best[0], 2 * cfg.n_iter, cfg.tol, metric)
    mu, sigma = _component_weight(T, v, metric)
    if mu < 0:
        v, mu = -v, -mu
    return v, mu, sigma, best[3] + steps, restarts - len(survivors)


def decompose(M2, T, k: int, cfg: Optional[PowerConfig] = None, theta=None) -> DecompositionResult:
    """
    Recover k unit directions from a symmetric third-order moment.

    Args:
        M2: Paired second-order moment (used for whitening unless cfg selects
            the contraction option, in which case it only feeds the
            least-squares coefficient estimate; may then be None)
        T: Third-order moment (d, d, d)
        k: Number of components
        cfg: Power method settings
        theta: Contraction vector for the contraction whitening option;
            the best-conditioned of cfg.svd_trials standard
            normal draws when omitted

    Restarts are ranked by |sigma|^1.5 mu with sigma = v^T S v under the
    whitening sign metric S and mu = sign(sigma) T(Sv, Sv, Sv) / |sigma|^3.
    With S = I this is the plain T(v, v, v) ranking.

    Returns:
        DecompositionResult with unit-norm columns and nonnegative weights

    Raises:
        InvalidArgumentError: Unless 1 <= k <= d; use decompose_overcomplete
            for k > d
        IllConditionedMomentError, DegenerateIterateError, DegenerateCoefficientError:
            With the offending component index in the message
    """
    cfg = cfg or PowerConfig()
    T = as_tensor3(T, cubic=True)
    d = T.shape[0]
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"Need 1 <= k <= d for the direct decomposition, got k={k}, d={d}")
    seed = cfg.seed if cfg.seed is not None else 0
    rng = np.random.default_rng(seed)
    warnings: List[str] = []
    if Whitening(cfg.whitening) is Whitening.CONTRACTION:
        if theta is None:
            theta = _choose_theta(T, k, rng, cfg.svd_trials)
        paired = second_moment_option2(T, theta)
    else:
        if M2 is None:
            raise InvalidArgumentError("Score whitening needs a second-order moment")
        paired = M2
    wt, working = whiten(paired, T, k, cfg.eigen_floor)
    if wt.indefinite:
        message = f"Paired second moment is indefinite (signs {wt.signs.astype(int).tolist()}); using the signed power update"
        logger.warning(message)
        warnings.append(message)

    restarts = cfg.restarts_for(k)
    component_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]
    vectors, weights, sigmas, diagnostics = [], [], [], []
    for j in range(k):
        try:
            v, mu, sigma, iterations, failed = _extract_component(working, cfg, restarts, wt.signs, component_rngs[j])
        except NNLiftError as e:
            raise type(e)(f"component {j}: {e}") from e
        working = deflate(working, v, mu)
        residual = frobenius(working)
        diagnostics.append(ComponentDiagnostics(j, mu, iterations, restarts, failed, residual))
        logger.info(f"Recovered component {j} with weight {mu:.4g}; residual {residual:.3e}")
        vectors.append(v)
        weights.append(mu)
        sigmas.append(sigma)

    directions = np.zeros((d, k))
    lam2 = np.zeros(k)
    lam3 = np.zeros(k)
    for j, (v, mu, sigma) in enumerate(zip(vectors, weights, sigmas)):
        lam2[j], lam3[j] = _implied_coefficients(wt, v, mu, sigma)
        try:
            directions[:, j] = unwhiten(wt, v, lam2[j])
        except NNLiftError as e:
            raise type(e)(f"component {j}: {e}") from e

    second_order_ls = None
    if M2 is not None:
        second_order_ls = fit_second_order_coefficients(M2, directions)
        if Whitening(cfg.whitening) is Whitening.CONTRACTION:
            lam2 = second_order_ls
    return DecompositionResult(
        directions=directions,
        weights=np.array(weights),
        coefficients=lam2,
        third_order_coefficients=lam3,
        whitening=wt,
        diagnostics=diagnostics,
        second_order_ls=second_order_ls,
        warnings=warnings,
    )


def decompose_overcomplete(T6, d: int, k: int, cfg: Optional[PowerConfig] = None, theta=None) -> OvercompleteResult:
    """
    Decompose sum_j lambda_j a_j^{x6} through its third-order tensorization.

    The paired moment is T~(I, I, theta) with theta = vec(I_d) by default, which
    weights each Khatri-Rao component by lambda_j ||a_j||^2.

    Args:
        T6: Sixth-order tensor over R^d (dense or flat)
        d: Input dimension
        k: Number of components, at most d(d+1)/2
        cfg: Power method settings
        theta: Optional contraction vector of length d^2

    Returns:
        OvercompleteResult with unit Khatri-Rao columns and unit directions

    Raises:
        InvalidArgumentError: If k exceeds d(d+1)/2
    """
    if k > d * (d + 1) // 2:
        raise InvalidArgumentError(f"Rank {k} exceeds d(d+1)/2 = {d * (d + 1) // 2}")
    cfg = cfg or PowerConfig()
    T3 = tensorize_6_to_3(T6, d)
    if theta is None:
        theta = np.eye(d).ravel()
    paired = second_moment_option2(T3, theta)
    score_cfg = cfg.copy(update={"whitening": Whitening.SCORE})
    result = decompose(paired, T3, k, score_cfg)
    directions = np.zeros((d, k))
    for j in range(k):
        U, _, _ = np.linalg.svd(result.directions[:, j].reshape(d, d))
        directions[:, j] = _orient_columns(U[:, :1])[:, 0]
    logger.info(f"Extracted {k} directions in dimension {d} from the tensorized moment")
    return OvercompleteResult(khatri_rao_columns=result.directions, directions=directions, decomposition=result)
