"""
End-to-end training: moments, tensor decomposition, Fourier biases and the
ridge-fitted output layer, plus synthetic data generation and evaluation.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__
from .activations import activate
from .config import (
    BINARY_A2_RANGE,
    BINARY_B2_RANGE,
    CONTINUOUS_B2_RANGE,
    DEFAULT_RISK_SAMPLES,
    KERNEL_SCALE_RANGE,
    KERNEL_SHIFT_SCALE,
    SIGN_SEARCH_EXHAUSTIVE_LIMIT,
    SIGN_SEARCH_SWEEPS,
)
from .cp_decomposition import DecompositionResult, decompose
from .errors import InvalidArgumentError, NNLiftError, StageError, StateError
from .fourier_bias import BiasEstimate, activation_spectrum, estimate_bias, wrap_bias
from .models import (
    Activation,
    DataSettings,
    DatasetHeader,
    ExperimentReport,
    FourierSettings,
    GeneratorProvenance,
    KernelComponentRecord,
    KernelTargetRecord,
    LabelMode,
    NetworkRecord,
    PowerConfig,
    RegressionSettings,
    TargetKind,
)
from .moments import shard_moments
from .regression import RidgeFit, featurize, select_lambda
from .score import Density, GaussianDensity

logger = logging.getLogger(__name__)


@dataclass
class NetworkParams:
    """Two-layer network f(x) = <a2, sigma(A1^T x + b1)> + b2."""
    A1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: float
    activation: Activation

    def __post_init__(self):
        self.A1 = np.atleast_2d(np.asarray(self.A1, dtype=float))
        self.b1 = np.asarray(self.b1, dtype=float)
        self.a2 = np.asarray(self.a2, dtype=float)
        self.b2 = float(self.b2)
        self.activation = Activation(self.activation)
        self.validate()

    @property
    def d(self) -> int:
        return self.A1.shape[0]

    @property
    def k(self) -> int:
        return self.A1.shape[1]

    def validate(self) -> None:
        k = self.A1.shape[1]
        if self.b1.shape != (k,) or self.a2.shape != (k,):
            raise InvalidArgumentError(f"b1 {self.b1.shape} and a2 {self.a2.shape} must have length {k}")
        if np.any(np.abs(np.linalg.norm(self.A1, axis=0) - 1.0) > 1e-10):
            raise InvalidArgumentError("First-layer columns must have unit norm")
        if np.any(np.abs(self.b1) > 1.0 + 1e-12):
            raise InvalidArgumentError("First-layer biases must lie in [-1, 1]")

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return activate(self.activation, X @ self.A1 + self.b1) @ self.a2 + self.b2

    def to_record(self) -> NetworkRecord:
        return NetworkRecord(
            A1=self.A1.tolist(),
            b1=self.b1.tolist(),
            a2=self.a2.tolist(),
            b2=self.b2,
            activation=self.activation,
        )

    @classmethod
    def from_record(cls, record: NetworkRecord) -> "NetworkParams":
        return cls(A1=record.A1, b1=record.b1, a2=record.a2, b2=record.b2, activation=record.activation)


@dataclass
class KernelMixtureTarget:
    """f(x) = sum_m g_m exp(-||alpha_m (x + beta_m)||^2 / 2)."""
    alphas: np.ndarray
    betas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.betas = np.atleast_2d(np.asarray(self.betas, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        m = self.alphas.size
        if self.betas.shape[0] != m or self.weights.shape != (m,):
            raise InvalidArgumentError("Kernel components need one scale, shift and weight each")
        if np.any(self.alphas <= 0):
            raise InvalidArgumentError("Kernel scales must be positive")

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        shifted = self.alphas[None, :, None] * (X[:, None, :] + self.betas[None, :, :])
        return np.exp(-0.5 * np.sum(shifted * shifted, axis=-1)) @ self.weights

    def to_record(self) -> KernelTargetRecord:
        return KernelTargetRecord(
            components=[
                KernelComponentRecord(alpha=float(a), beta=b.tolist(), weight=float(g))
                for a, b, g in zip(self.alphas, self.betas, self.weights)
            ]
        )

    @classmethod
    def from_record(cls, record: KernelTargetRecord) -> "KernelMixtureTarget":
        return cls(
            alphas=[c.alpha for c in record.components],
            betas=[c.beta for c in record.components],
            weights=[c.weight for c in record.components],
        )


@dataclass
class Dataset:
    """Labeled samples with the density they were drawn from."""
    X: np.ndarray
    y: np.ndarray
    density: Density
    provenance: Optional[GeneratorProvenance] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape[0] != self.X.shape[0] or self.y.ndim not in (1, 2):
            raise InvalidArgumentError(f"Labels of shape {self.y.shape} do not match {self.X.shape[0]} inputs")
        if self.density.dim != self.X.shape[1]:
            raise InvalidArgumentError("Density dimension does not match the inputs")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def label_arity(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    def header(self) -> DatasetHeader:
        descriptor = self.density.descriptor()
        if descriptor is None:
            raise StateError("The dataset density cannot be described in a header")
        return DatasetHeader(
            d=self.d, n=self.n, label_arity=self.label_arity, density=descriptor, provenance=self.provenance
        )

    def ground_truth(self) -> Optional[Union[NetworkParams, KernelMixtureTarget]]:
        """The generating network or kernel target, when recorded."""
        if self.provenance is None:
            return None
        if self.provenance.params is not None:
            return NetworkParams.from_record(self.provenance.params)
        if self.provenance.kernel is not None:
            return KernelMixtureTarget.from_record(self.provenance.kernel)
        return None


@dataclass
class AlignmentReport:
    """Column matching of estimated to true directions."""
    permutation: np.ndarray
    signs: np.ndarray
    errors: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors)) if self.errors.size else 0.0


@dataclass
class TrainingArtifacts:
    """Intermediate results kept alongside the estimate."""
    moments: Tuple[np.ndarray, np.ndarray]
    decomposition: DecompositionResult
    bias: BiasEstimate
    fit: RidgeFit
    label_projection: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def _unit_columns(A: np.ndarray) -> np.ndarray:
    return A / np.linalg.norm(A, axis=0, keepdims=True)


def generate_realizable(
    d: int,
    k: int,
    n: int,
    sigma_x: float = 1.0,
    activation=Activation.STEP,
    label_mode=LabelMode.CONTINUOUS,
    sigma_noise: float = 0.01,
    seed: int = 0,
) -> Tuple[Dataset, NetworkParams]:
    """
    Draw a random two-layer network and labeled Gaussian inputs.

    Binary labels are Bernoulli(f(x)) with a2 >= 0, b2 >= 0 scaled so that
    sum(a2) + b2 <= 1; continuous labels are f(x) + N(0, sigma_noise^2).

    Raises:
        InvalidArgumentError: For binary labels with an unbounded activation,
            or non-positive sizes
    """
    activation, label_mode = Activation(activation), LabelMode(label_mode)
    if min(d, k, n) < 1 or sigma_x <= 0:
        raise InvalidArgumentError(f"Invalid generator sizes d={d}, k={k}, n={n}, sigma_x={sigma_x}")
    if label_mode is LabelMode.BINARY and activation is Activation.LINEAR:
        raise InvalidArgumentError("Binary labels cannot be scaled into [0, 1] with a linear activation")
    if k > d:
        logger.warning(f"k={k} exceeds d={d}; only the tensorized decomposition can recover this network")
    rng = np.random.default_rng(seed)
    A1 = _unit_columns(rng.standard_normal((d, k)))
    b1 = rng.uniform(-1.0, 1.0, size=k)
    if label_mode is LabelMode.BINARY:
        a2_raw = rng.uniform(*BINARY_A2_RANGE, size=k)
        b2_raw = rng.uniform(*BINARY_B2_RANGE)
        scale = 1.0 / (a2_raw.sum() + 2.0 * b2_raw)
        a2, b2 = a2_raw * scale, b2_raw * scale
    else:
        a2 = rng.uniform(*BINARY_A2_RANGE, size=k) * rng.choice((-1.0, 1.0), size=k)
        b2 = rng.uniform(*CONTINUOUS_B2_RANGE)
    params = NetworkParams(A1=A1, b1=b1, a2=a2, b2=b2, activation=activation)

    density = GaussianDensity(dim=d, variance=sigma_x ** 2)
    X = density.sample(n, rng)
    f = params.evaluate(X)
    if label_mode is LabelMode.BINARY:
        y = (rng.uniform(size=n) < f).astype(float)
    elif sigma_noise > 0:
        y = f + sigma_noise * rng.standard_normal(n)
    else:
        y = f
    provenance = GeneratorProvenance(
        generator="realizable",
        seed=seed,
        target=TargetKind.REALIZABLE,
        label_mode=label_mode,
        sigma_noise=sigma_noise,
        params=params.to_record(),
        package_version=__version__,
    )
    logger.info(f"Generated realizable dataset: d={d}, k={k}, n={n}, {activation.value}, {label_mode.value} labels")
    return Dataset(X=X, y=y, density=density, provenance=provenance), params


def random_kernel_target(d: int, m: int, seed: int = 0, sigma_x: float = 1.0) -> KernelMixtureTarget:
    """
    Random m-component Gaussian-kernel mixture in R^d.

    Widths scale as 1 / (sigma_x sqrt(d)) and shifts as sigma_x, so alpha^2 ||x + beta||^2
    stays of order one on the bulk of N(0, sigma_x^2 I).
    """
    if d < 1 or m < 1 or sigma_x <= 0:
        raise InvalidArgumentError(f"Invalid kernel target sizes d={d}, m={m}, sigma_x={sigma_x}")
    rng = np.random.default_rng(seed)
    return KernelMixtureTarget(
        alphas=rng.uniform(*KERNEL_SCALE_RANGE, size=m) / (sigma_x * np.sqrt(d)),
        betas=KERNEL_SHIFT_SCALE * sigma_x * rng.standard_normal((m, d)),
        weights=rng.uniform(-1.0, 1.0, size=m),
    )


def generate_kernel_target(target: KernelMixtureTarget, n: int, sigma_x: float = 1.0, seed: int = 0) -> Dataset:
    """Noiseless labels y = f(x) of a kernel mixture on Gaussian inputs."""
    if n < 1 or sigma_x <= 0:
        raise InvalidArgumentError(f"Invalid generator sizes n={n}, sigma_x={sigma_x}")
    d = target.betas.shape[1]
    density = GaussianDensity(dim=d, variance=sigma_x ** 2)
    X = density.sample(n, np.random.default_rng(seed))
    provenance = GeneratorProvenance(
        generator="kernel_mixture",
        seed=seed,
        target=TargetKind.KERNEL,
        kernel=target.to_record(),
        package_version=__version__,
    )
    return Dataset(X=X, y=target.evaluate(X), density=density, provenance=provenance)


def generate_dataset(settings: DataSettings, seed: int) -> Dataset:
    """Dispatch to the generator named in the data settings."""
    if settings.target is TargetKind.KERNEL:
        target = random_kernel_target(settings.d, settings.kernel_components, seed, settings.sigma_x)
        return generate_kernel_target(target, settings.n, settings.sigma_x, seed + 1)
    dataset, _ = generate_realizable(
        settings.d,
        settings.k,
        settings.n,
        settings.sigma_x,
        settings.activation,
        settings.label_mode,
        settings.sigma_noise,
        seed,
    )
    return dataset


def evaluate_params(params: NetworkParams, X) -> np.ndarray:
    """Network output at each row of X."""
    return params.evaluate(X)


def align(true, est) -> AlignmentReport:
    """
    Match estimated columns to true ones up to permutation and sign.

    Uses the Hungarian algorithm on the cost 1 - |cos(a_i, a_hat_j)|; errors are
    ||a_i - z_i a_hat_pi(i)|| for the chosen signs.
    """
    true = np.atleast_2d(np.asarray(true, dtype=float))
    est = np.atleast_2d(np.asarray(est, dtype=float))
    if true.shape != est.shape:
        raise InvalidArgumentError(f"Cannot align {true.shape} with {est.shape}")
    inner = true.T @ est
    norms = np.outer(np.linalg.norm(true, axis=0), np.linalg.norm(est, axis=0))
    cosine = np.divide(inner, norms, out=np.zeros_like(inner), where=norms > 0)
    _, permutation = linear_sum_assignment(1.0 - np.abs(cosine))
    matched = inner[np.arange(true.shape[1]), permutation]
    signs = np.where(matched < 0, -1.0, 1.0)
    errors = np.linalg.norm(true - est[:, permutation] * signs, axis=0)
    return AlignmentReport(permutation=permutation, signs=signs, errors=errors)


def _risk_sample(f_true: Callable, f_est: Callable, density: Density, n_mc: int, seed: int) -> Tuple[float, float, float]:
    if n_mc < 2:
        raise InvalidArgumentError(f"Risk needs at least 2 Monte-Carlo samples, got {n_mc}")
    X = density.sample(n_mc, np.random.default_rng(seed))
    truth = np.asarray(f_true(X), dtype=float)
    sq = (truth - np.asarray(f_est(X), dtype=float)) ** 2
    return float(np.mean(sq)), float(np.std(sq, ddof=1) / np.sqrt(n_mc)), float(np.var(truth, ddof=1))


def risk(f_true: Callable, params_est, density: Density, n_mc: int = DEFAULT_RISK_SAMPLES, seed: int = 0) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of E_x |f(x) - f_hat(x)|^2.

    Args:
        f_true: Target function on batches
        params_est: NetworkParams or a callable on batches
        density: Sampling density
        n_mc: Number of fresh draws
        seed: RNG seed

    Returns:
        (risk, standard error)
    """
    f_est = params_est.evaluate if isinstance(params_est, NetworkParams) else params_est
    value, se, _ = _risk_sample(f_true, f_est, density, n_mc, seed)
    return value, se


def _candidate_columns(b_hat: float, b_alt: float) -> List[Tuple[float, float]]:
    return [(1.0, b_hat), (-1.0, -b_hat), (1.0, b_alt), (-1.0, -b_alt)]


def resolve_signs(
    X,
    y,
    directions,
    bias: BiasEstimate,
    activation,
    settings: Optional[RegressionSettings] = None,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray, RidgeFit]:
    """
    Pick the sign and phase branch of every column by holdout error.

    Each column is offered as (v, b), (-v, -b), (v, b'), (-v, -b') with b' the
    half-period alternative; the combination with the lowest holdout MSE of the
    lambda-selected ridge fit wins. The search is exhaustive while 4^k stays
    within the configured limit and coordinate-wise otherwise.

    Returns:
        (A1_hat, b1_hat, fit)
    """
    settings = settings or RegressionSettings()
    X = np.asarray(X, dtype=float)
    directions = np.asarray(directions, dtype=float)
    k = directions.shape[1]
    options = [_candidate_columns(bias.b1[j], bias.alternative_b1[j]) for j in range(k)]
    hidden = [
        [featurize(X, directions[:, [j]] * z, np.array([b]), activation)[:, 0] for z, b in options[j]]
        for j in range(k)
    ]
    ones = np.ones((X.shape[0], 1))

    def _fit(choice: Sequence[int]) -> RidgeFit:
        features = np.column_stack([hidden[j][c] for j, c in enumerate(choice)] + [ones])
        return select_lambda(
            features,
            y,
            grid=settings.lambda_grid,
            holdout_fraction=settings.holdout_fraction,
            seed=seed,
            multipliers=settings.lambda_multipliers,
        )

    if 4 ** k <= SIGN_SEARCH_EXHAUSTIVE_LIMIT:
        best_choice, best_fit = None, None
        for choice in itertools.product(range(4), repeat=k):
            fit = _fit(choice)
            if best_fit is None or fit.holdout_mse < best_fit.holdout_mse:
                best_choice, best_fit = choice, fit
    else:
        best_choice = [0] * k
        best_fit = _fit(best_choice)
        for _ in range(SIGN_SEARCH_SWEEPS):
            for j in range(k):
                for c in range(4):
                    if c == best_choice[j]:
                        continue
                    trial = list(best_choice)
                    trial[j] = c
                    fit = _fit(trial)
                    if fit.holdout_mse < best_fit.holdout_mse:
                        best_choice, best_fit = trial, fit
    signs = np.array([options[j][c][0] for j, c in enumerate(best_choice)])
    b1_hat = np.array([options[j][c][1] for j, c in enumerate(best_choice)])
    logger.info(f"Resolved column signs {signs.astype(int).tolist()} with holdout MSE {best_fit.holdout_mse:.4g}")
    return directions * signs, b1_hat, best_fit


def _bias_options(fourier: FourierSettings) -> dict:
    return dict(
        epsilon=fourier.epsilon,
        psi_fraction=fourier.psi_fraction,
        epsilon_floor=fourier.epsilon_floor,
        phase_floor=fourier.phase_floor,
        window_exponent=fourier.window_exponent,
        workers=fourier.workers,
    )


def refine_biases(
    X,
    y,
    density: Density,
    directions,
    b1_hat,
    fit: RidgeFit,
    activation,
    fourier: Optional[FourierSettings] = None,
    regression: Optional[RegressionSettings] = None,
    seed: int = 0,
    regression_seed: int = 0,
) -> Tuple[np.ndarray, RidgeFit, Optional[BiasEstimate]]:
    """
    Re-read the biases with the rest of the fitted network taken out of the labels.

    Every pass subtracts the fitted contribution of the other units and of b2
    before forming a column's statistic, keeps the branch that matches the
    sign of the column's output weight and refits the output layer. Columns
    with an unreliable statistic keep their bias.

    Args:
        directions: Signed directions chosen by resolve_signs (d, k)
        b1_hat: Their biases (k,)
        fit: Output layer fitted on those features
        seed: Seed of the Fourier draws
        regression_seed: Seed of the holdout split

    Returns:
        (b1_hat, fit, estimate of the last pass or None without passes)
    """
    fourier = fourier or FourierSettings()
    regression = regression or RegressionSettings()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    directions = np.asarray(directions, dtype=float)
    b1_hat = np.asarray(b1_hat, dtype=float)
    spectrum = activation_spectrum(activation)
    bias = None
    for step in range(fourier.refine_passes):
        contributions = activate(activation, X @ directions + b1_hat) * fit.a2
        offsets = (contributions.sum(axis=1) + fit.b2)[:, None] - contributions
        bias = estimate_bias(X, y, density, directions, spectrum, seed=seed, offsets=offsets, **_bias_options(fourier))
        bias = bias.select(fit.a2 < 0)
        reliable = np.array([stat.reliable for stat in bias.stats])
        updated = np.where(reliable, bias.b1, b1_hat)
        change = float(np.max(np.abs(wrap_bias(updated - b1_hat)))) if updated.size else 0.0
        b1_hat = updated
        fit = select_lambda(
            featurize(X, directions, b1_hat, activation),
            y,
            grid=regression.lambda_grid,
            holdout_fraction=regression.holdout_fraction,
            seed=regression_seed,
            multipliers=regression.lambda_multipliers,
        )
        logger.info(f"Refinement pass {step + 1}: largest bias change {change:.3g}, holdout MSE {fit.holdout_mse:.4g}")
    return b1_hat, fit, bias


def _stage(name: str, fn: Callable, timings: dict):
    start = time.perf_counter()
    try:
        return fn()
    except NNLiftError as e:
        logger.error(f"{name} stage failed: {e}")
        raise StageError(name, e) from e
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def fit_network(
    dataset: Dataset,
    k: int,
    decomposition: Optional[PowerConfig] = None,
    fourier: Optional[FourierSettings] = None,
    regression: Optional[RegressionSettings] = None,
    activation=Activation.STEP,
    seed: int = 0,
    density: Optional[Density] = None,
    moments: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[NetworkParams, TrainingArtifacts]:
    """
    Run the four training stages and keep every intermediate result.

    After the sign search the biases are re-read fourier.refine_passes times
    against the fitted network; that work is timed and failed as regression.

    Raises:
        StageError: Wrapping the failure of moments, decomposition, fourier or
            regression
    """
    decomposition = decomposition or PowerConfig()
    fourier = fourier or FourierSettings()
    regression = regression or RegressionSettings()
    density = density or dataset.density
    activation = Activation(activation)
    states = np.random.SeedSequence(seed).generate_state(4)
    if decomposition.seed is None:
        decomposition = decomposition.copy(update={"seed": int(states[3])})
    timings: dict = {}
    warnings: List[str] = []

    projection = None
    y = dataset.y
    if y.ndim == 2:
        projection = np.random.default_rng(int(states[0])).standard_normal(y.shape[1])
        projection /= np.linalg.norm(projection)
        y = y @ projection
        logger.info(f"Contracted {dataset.label_arity}-dimensional labels along a random unit vector")

    if moments is None:
        M2, T = _stage(
            "moments",
            lambda: shard_moments(
                dataset.X, y, density, shards=decomposition.workers, workers=decomposition.workers
            ).finalize(),
            timings,
        )
    else:
        M2, T = (np.asarray(m, dtype=float) for m in moments)
        logger.info("Using injected moments")

    decomposed = _stage("decomposition", lambda: decompose(M2, T, k, decomposition), timings)
    warnings.extend(decomposed.warnings)

    def _bias() -> BiasEstimate:
        return estimate_bias(
            dataset.X,
            y,
            density,
            decomposed.directions,
            activation_spectrum(activation),
            seed=int(states[1]),
            **_bias_options(fourier),
        )

    bias = _stage("fourier", _bias, timings)
    warnings.extend(bias.warnings)

    A1_hat, b1_hat, fit = _stage(
        "regression",
        lambda: resolve_signs(dataset.X, y, decomposed.directions, bias, activation, regression, int(states[2])),
        timings,
    )
    if fourier.refine_passes:
        b1_hat, fit, refined = _stage(
            "regression",
            lambda: refine_biases(
                dataset.X, y, density, A1_hat, b1_hat, fit, activation, fourier, regression, int(states[1]), int(states[2])
            ),
            timings,
        )
        bias = refined
    params = NetworkParams(A1=A1_hat, b1=b1_hat, a2=fit.a2, b2=fit.b2, activation=activation)
    artifacts = TrainingArtifacts(
        moments=(M2, T),
        decomposition=decomposed,
        bias=bias,
        fit=fit,
        label_projection=projection,
        warnings=warnings,
        timings=timings,
    )
    return params, artifacts


def build_report(
    dataset: Dataset,
    params: NetworkParams,
    label: str = "nnlift",
    seed: int = 0,
    risk_samples: int = DEFAULT_RISK_SAMPLES,
    fit: Optional[RidgeFit] = None,
    label_projection=None,
    warnings: Sequence[str] = (),
    timings: Optional[dict] = None,
) -> ExperimentReport:
    """
    Assemble the metrics of a fitted network against its dataset.

    Alignment, bias and output-layer errors need a recorded generating network;
    the risk needs any recorded ground truth and scalar labels.
    """
    y = dataset.y if label_projection is None else dataset.y @ label_projection
    residual = y - params.evaluate(dataset.X)
    provenance = dataset.provenance
    report = dict(
        label=label,
        target=provenance.target if provenance else None,
        d=dataset.d,
        k=params.k,
        n=dataset.n,
        seed=seed,
        activation=params.activation,
        empirical_mse=float(np.mean(residual * residual)),
        selected_lambda=fit.lam if fit else None,
        holdout_mse=fit.holdout_mse if fit else None,
        warnings=list(warnings),
        timings=dict(timings or {}),
    )
    truth = dataset.ground_truth() if label_projection is None else None
    if isinstance(truth, NetworkParams) and truth.k == params.k:
        alignment = align(truth.A1, params.A1)
        matched_b1 = params.b1[alignment.permutation] * alignment.signs
        matched_a2 = params.a2[alignment.permutation] * alignment.signs
        absorbed = float(np.sum(params.a2[alignment.permutation][alignment.signs < 0]))
        bias_errors = np.abs(truth.b1 - matched_b1)
        report.update(
            column_errors=alignment.errors.tolist(),
            max_column_error=alignment.max_error,
            mean_column_error=alignment.mean_error,
            bias_errors=bias_errors.tolist(),
            max_bias_error=float(np.max(bias_errors)),
            a2_errors=np.abs(truth.a2 - matched_a2).tolist(),
            b2_error=abs(truth.b2 - (params.b2 + absorbed)),
        )
    if truth is not None:
        value, se, variance = _risk_sample(truth.evaluate, params.evaluate, dataset.density, risk_samples, seed)
        report.update(risk=value, risk_se=se, target_variance=variance)
    return ExperimentReport(**report)


def train(
    dataset: Dataset,
    density: Optional[Density],
    k: int,
    decomposition: Optional[PowerConfig] = None,
    fourier: Optional[FourierSettings] = None,
    regression: Optional[RegressionSettings] = None,
    activation=Activation.STEP,
    seed: int = 0,
    label: str = "nnlift",
    risk_samples: int = DEFAULT_RISK_SAMPLES,
    moments: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[NetworkParams, ExperimentReport]:
    """
    Learn a two-layer network from labeled samples.

    Args:
        dataset: Inputs with scalar (n,) or vector (n, d_y) labels
        density: Input density; the dataset's own when None
        k: Number of hidden units
        decomposition: Power method settings
        fourier: Bias estimation settings
        regression: Output-layer settings
        activation: Hidden activation
        seed: Master seed for every stochastic step
        label: Report label
        risk_samples: Monte-Carlo draws for the risk against recorded ground truth
        moments: Optional (M2, T) used instead of the empirical moments

    Returns:
        (estimated NetworkParams, ExperimentReport)

    Raises:
        StageError: Labeled with the failing stage
    """
    params, artifacts = fit_network(
        dataset, k, decomposition, fourier, regression, activation, seed, density, moments
    )
    report = build_report(
        dataset,
        params,
        label=label,
        seed=seed,
        risk_samples=risk_samples,
        fit=artifacts.fit,
        label_projection=artifacts.label_projection,
        warnings=artifacts.warnings,
        timings=artifacts.timings,
    )
    logger.info(f"Training finished for {label}: empirical MSE {report.empirical_mse:.4g}")
    return params, report
