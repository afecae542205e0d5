"""
Fourier phase estimation of first-layer biases.

For each recovered direction a, frequencies are drawn on the two caps of the
radius-1/2 sphere around +-a/2 and the statistic

    v = (1/n) sum_i y_i (p(x_i) / peak)^gamma / p(x_i) exp(-j 2 pi <w_i, x_i>)

is formed over the samples above the psi floor. With gamma = 0 this is the
plain importance-weighted transform of the labels; gamma > 0 tempers the
weights into a smooth window. Either way the mean of v for one unit is
a2 K(b1), where K is the windowed transform of sigma(<a, x> + b) at the drawn
frequencies. K is evaluated on the same samples and the bias is the b whose
K(b) is in phase with v; for an untruncated window this reduces to reading
pi b1 off the phase of v / Sigma(1/2).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special

from .activations import activate
from .config import (
    ACTIVATION_SPECTRA,
    CAP_EPSILON_FLOOR,
    CAP_RADIUS,
    DEFAULT_PSI_FRACTION,
    DEFAULT_WINDOW_EXPONENT,
    PHASE_MAGNITUDE_FLOOR,
    PROFILE_BINS,
    READOUT_GRID_POINTS,
    SPECTRUM_FREQUENCY,
    SPECTRUM_RHOS,
)
from .errors import DegenerateDimensionError, InsufficientDataError, InvalidArgumentError
from .models import Activation
from .score import Density

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SphericalCap:
    """Two-sided cap {w : ||w|| = radius, |<w, axis>| >= radius (1 - eps^2/2)}."""
    axis: np.ndarray
    epsilon: float
    radius: float = CAP_RADIUS

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.ndim != 1 or abs(np.linalg.norm(axis) - 1.0) > 1e-10:
            raise InvalidArgumentError("Cap axis must be a unit vector")
        if not 0.0 < self.epsilon < math.sqrt(2.0):
            raise InvalidArgumentError(f"epsilon must lie in (0, sqrt(2)), got {self.epsilon}")
        object.__setattr__(self, "axis", axis)

    @property
    def dim(self) -> int:
        return self.axis.size

    @property
    def cosine(self) -> float:
        """Smallest admitted |cos| between a draw and the axis."""
        return 1.0 - 0.5 * self.epsilon ** 2


@dataclass(frozen=True)
class ActivationSpectrum:
    activation: Activation
    value: complex
    note: str = ""

    def __post_init__(self):
        if not abs(self.value) > 0:
            raise InvalidArgumentError(f"Spectrum of {self.activation.value} vanishes at the read-out frequency")


@dataclass
class ComplexStat:
    """Phase statistic for one column."""
    value: complex
    count: int
    folded: int
    filtered: int
    uncorrected_b1: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def reliable(self) -> bool:
        return not self.warnings


@dataclass
class BiasEstimate:
    """
    Per-column bias read-outs and output-weight magnitudes.

    b1 assumes a positive output weight and alternative_b1 a negative one; the
    two differ by about half a period.
    """
    b1: np.ndarray
    a2_magnitude: np.ndarray
    alternative_b1: np.ndarray
    alternative_a2_magnitude: np.ndarray
    stats: List[ComplexStat]
    epsilon: float
    cap_area: float
    warnings: List[str] = field(default_factory=list)

    def select(self, negative) -> "BiasEstimate":
        """Swap the two branches of the columns flagged as having a negative output weight."""
        negative = np.asarray(negative, dtype=bool)
        return replace(
            self,
            b1=np.where(negative, self.alternative_b1, self.b1),
            a2_magnitude=np.where(negative, self.alternative_a2_magnitude, self.a2_magnitude),
            alternative_b1=np.where(negative, self.b1, self.alternative_b1),
            alternative_a2_magnitude=np.where(negative, self.a2_magnitude, self.alternative_a2_magnitude),
        )


def wrap_bias(x):
    """Map phases in units of pi to (-1, 1]."""
    return 1.0 - np.mod(1.0 - np.asarray(x, dtype=float), 2.0)


def sample_cap(cap: SphericalCap, count: int, seed=0) -> np.ndarray:
    """
    Draw frequencies uniformly from the two-sided cap.

    The squared cosine with the axis of a uniform unit vector follows
    Beta(1/2, (d-1)/2); it is drawn by inverse CDF restricted to the cap and
    combined with a uniform direction orthogonal to the axis.

    Args:
        cap: Cap description
        count: Number of draws
        seed: Integer seed, SeedSequence or Generator

    Returns:
        Array (count, d) with rows of norm cap.radius

    Raises:
        DegenerateDimensionError: If d = 1
    """
    d = cap.dim
    if d < 2:
        raise DegenerateDimensionError("The cap in one dimension is the two points +-axis/2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a, b = 0.5, 0.5 * (d - 1)
    lower = special.betainc(a, b, cap.cosine ** 2)
    cos_sq = special.betaincinv(a, b, rng.uniform(lower, 1.0, size=count))
    cos = np.sqrt(cos_sq) * rng.choice((-1.0, 1.0), size=count)
    orth = rng.standard_normal((count, d))
    orth -= np.outer(orth @ cap.axis, cap.axis)
    orth /= np.linalg.norm(orth, axis=1, keepdims=True)
    u = cos[:, None] * cap.axis[None, :] + np.sqrt(np.clip(1.0 - cos_sq, 0.0, None))[:, None] * orth
    return cap.radius * u / np.linalg.norm(u, axis=1, keepdims=True)


def surface_area_cap(d: int, epsilon: float, radius: float = CAP_RADIUS) -> float:
    """
    Surface area of the two-sided cap on the sphere of the given radius in R^d.

    Raises:
        DegenerateDimensionError: If d < 2
    """
    if d < 2:
        raise DegenerateDimensionError("Cap area is undefined for d < 2")
    c = 1.0 - 0.5 * epsilon ** 2
    log_sphere = math.log(2.0) + 0.5 * d * math.log(math.pi) - special.gammaln(0.5 * d) + (d - 1) * math.log(radius)
    # Upper tail of Beta(1/2, (d-1)/2) at c^2, written through the mirrored beta
    fraction = special.betainc(0.5 * (d - 1), 0.5, 1.0 - c * c)
    return float(math.exp(log_sphere) * fraction)


def activation_spectrum(activation) -> ActivationSpectrum:
    """Shipped closed-form Sigma(1/2) for an activation."""
    activation = Activation(activation)
    if activation.value not in ACTIVATION_SPECTRA:
        raise InvalidArgumentError(f"No Fourier read-out for the {activation.value} activation")
    return ActivationSpectrum(activation, ACTIVATION_SPECTRA[activation.value], note="closed form")


def _regularized_spectrum(activation: Activation, frequency: float, rho: float) -> complex:
    omega = 2.0 * math.pi * frequency
    root = math.sqrt(rho)
    # Heaviside part: int_0^inf exp(-rho t^2 - j omega t) dt
    real = 0.5 * math.sqrt(math.pi / rho) * math.exp(-omega * omega / (4.0 * rho))
    imag = -special.dawsn(omega / (2.0 * root)) / root
    if activation is not Activation.STEP:
        # sigma - H is odd about 0 and its transform is 2j int_0^inf sigma(-t) sin(omega t) dt
        residual, _ = integrate.quad(
            lambda t: float(activate(activation, -t)) * math.exp(-rho * t * t),
            0.0,
            np.inf,
            weight="sin",
            wvar=omega,
            epsabs=1e-13,
        )
        imag += 2.0 * residual
    return complex(real, imag)


def activation_spectrum_oracle(activation, rhos: Sequence[float] = SPECTRUM_RHOS, frequency: float = SPECTRUM_FREQUENCY) -> complex:
    """
    Numerically evaluate Sigma(frequency) = int sigma(t) exp(-j 2 pi frequency t) dt.

    The integral is damped by exp(-rho t^2) and extrapolated to rho = 0 through
    the polynomial interpolating the damped values.

    Args:
        activation: Activation with sigma(z) = 1 - sigma(-z)
        rhos: Damping levels
        frequency: Read-out frequency

    Returns:
        The extrapolated complex transform
    """
    activation = Activation(activation)
    if activation is Activation.LINEAR:
        raise InvalidArgumentError("The linear activation has no Fourier read-out")
    rhos = np.asarray(rhos, dtype=float)
    values = np.array([_regularized_spectrum(activation, frequency, rho) for rho in rhos])
    degree = rhos.size - 1
    real = np.polyval(np.polyfit(rhos, values.real, degree), 0.0)
    imag = np.polyval(np.polyfit(rhos, values.imag, degree), 0.0)
    return complex(real, imag)


def sample_weights(p, peak: float, psi_fraction: float = DEFAULT_PSI_FRACTION, window_exponent: float = DEFAULT_WINDOW_EXPONENT) -> Tuple[np.ndarray, np.ndarray]:
    """
    Psi filter and window weights (p / peak)^gamma / p.

    Returns:
        (keep mask over all samples, weights of the kept samples)
    """
    p = np.asarray(p, dtype=float)
    if not 0.0 <= window_exponent <= 1.0:
        raise InvalidArgumentError(f"window_exponent must lie in [0, 1], got {window_exponent}")
    keep = p >= psi_fraction * peak
    kept = p[keep]
    return keep, (kept / peak) ** window_exponent / kept


class ProfileKernel:
    """
    Windowed transform K(b) = (1/n) sum_i c_i sigma(s_i + b) of a single unit.

    s_i are the sample projections on the column and c_i the complex weights of
    its statistic, so K(b) is what the statistic would be for labels produced
    by one unit of bias b and unit output weight. The step activation is summed
    exactly over sorted projections; smooth activations bin the weights.
    """

    def __init__(self, activation, projection: np.ndarray, weights: np.ndarray, n_total: int, bins: int = PROFILE_BINS):
        self.activation = Activation(activation)
        self.n_total = n_total
        if self.activation is Activation.STEP:
            order = np.argsort(projection, kind="stable")
            self._points = projection[order]
            self._tail = np.append(np.cumsum(weights[order][::-1])[::-1], 0j)
        else:
            lo, hi = float(projection.min()), float(projection.max())
            edges = np.linspace(lo, max(hi, lo + 1e-12), bins + 1)
            index = np.clip(np.searchsorted(edges, projection, side="right") - 1, 0, bins - 1)
            self._points = 0.5 * (edges[:-1] + edges[1:])
            self._mass = np.bincount(index, weights=weights.real, minlength=bins) + 1j * np.bincount(
                index, weights=weights.imag, minlength=bins
            )

    def __call__(self, b) -> np.ndarray:
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.activation is Activation.STEP:
            return self._tail[np.searchsorted(self._points, -b, side="right")] / self.n_total
        return activate(self.activation, self._points[None, :] + b[:, None]) @ self._mass / self.n_total


def _branch_misfit(kernel: ProfileKernel, value: complex, b, sign: float) -> Tuple[np.ndarray, np.ndarray]:
    # min over a with sign * a >= 0 of |value - a K(b)|^2
    K = kernel(b)
    power = np.maximum(np.abs(K) ** 2, np.finfo(float).tiny)
    inner = np.maximum(sign * (value * np.conj(K)).real, 0.0)
    return abs(value) ** 2 - inner * inner / power, inner / power


def read_branch(kernel: ProfileKernel, value: complex, sign: float = 1.0, grid_points: int = READOUT_GRID_POINTS) -> Tuple[float, float]:
    """
    Bias of the given output-weight sign that best explains a column statistic.

    Scans b over [-1, 1], then polishes the best grid point with a bounded
    scalar search.

    Returns:
        (b in (-1, 1], |a2|)
    """
    grid = np.linspace(-1.0, 1.0, grid_points)
    misfit, _ = _branch_misfit(kernel, value, grid, sign)
    best = int(np.argmin(misfit))
    step = grid[1] - grid[0]
    result = optimize.minimize_scalar(
        lambda b: float(_branch_misfit(kernel, value, b, sign)[0][0]),
        bounds=(max(grid[best] - step, -1.0), min(grid[best] + step, 1.0)),
        method="bounded",
        options={"xatol": 1e-7},
    )
    b = float(result.x) if result.fun <= misfit[best] else float(grid[best])
    _, magnitude = _branch_misfit(kernel, value, b, sign)
    return float(wrap_bias(b)), float(magnitude[0])


def _column_statistic(
    X: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    n_total: int,
    filtered: int,
    cap: SphericalCap,
    seed: np.random.SeedSequence,
    phase_floor: float,
    activation: Activation,
) -> Tuple[ComplexStat, ProfileKernel]:
    rng = np.random.default_rng(seed)
    if cap.dim == 1:
        omega = cap.radius * rng.choice((-1.0, 1.0), size=X.shape[0])[:, None] * cap.axis[None, :]
    else:
        omega = sample_cap(cap, X.shape[0], rng)
    # Draws on the opposite cap are mirrored onto the axis cap
    side = np.where(omega @ cap.axis < 0, -1.0, 1.0)
    omega *= side[:, None]
    kernel_weights = weights * np.exp(-2j * math.pi * np.einsum("ij,ij->i", omega, X))
    value = complex(np.sum(kernel_weights * labels) / n_total)
    stat = ComplexStat(value=value, count=X.shape[0], folded=int(np.sum(side < 0)), filtered=filtered)
    if abs(value) < phase_floor:
        stat.warnings.append(f"|v| = {abs(value):.2e} is below the phase floor {phase_floor:.1e}; phase unreliable")
    return stat, ProfileKernel(activation, X @ cap.axis, kernel_weights, n_total)


def estimate_bias(
    X,
    y,
    density: Density,
    A1_hat,
    spectrum: ActivationSpectrum,
    epsilon: Optional[float] = None,
    seed: int = 0,
    psi_fraction: float = DEFAULT_PSI_FRACTION,
    epsilon_floor: float = CAP_EPSILON_FLOOR,
    phase_floor: float = PHASE_MAGNITUDE_FLOOR,
    window_exponent: float = DEFAULT_WINDOW_EXPONENT,
    offsets=None,
    workers: int = 1,
) -> BiasEstimate:
    """
    Estimate first-layer biases from the phase of the Fourier statistic.

    Args:
        X: Inputs (n, d)
        y: Scalar labels (n,)
        density: Input density; may be unnormalized
        A1_hat: Recovered unit directions (d, k)
        spectrum: Sigma(1/2) of the activation
        epsilon: Cap parameter; max(1/sqrt(n), epsilon_floor) when None
        seed: Master seed, split deterministically per column
        psi_fraction: Samples with p(x) below psi_fraction * peak are skipped
        epsilon_floor: Lower bound of the default epsilon
        phase_floor: |v| below this marks the phase unreliable
        window_exponent: gamma in the sample weights (p / peak)^gamma / p
        offsets: Optional (n, k) label parts subtracted before forming the
            statistic of each column, such as the fitted contribution of the
            other units and the output bias
        workers: Thread pool size for the per-column statistics

    Returns:
        BiasEstimate with both branches in (-1, 1]. Magnitudes are the output
        weights that best match each statistic, so they do not depend on the
        density normalization.

    Raises:
        InsufficientDataError: If every sample is below the psi floor
        InvalidArgumentError: On shape mismatch or non-unit directions
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    A1_hat = np.asarray(A1_hat, dtype=float)
    n, d = X.shape
    if y.shape != (n,):
        raise InvalidArgumentError(f"Expected {n} scalar labels, got shape {y.shape}")
    if A1_hat.ndim != 2 or A1_hat.shape[0] != d:
        raise InvalidArgumentError(f"Directions of shape {A1_hat.shape} do not match dimension {d}")
    if np.any(np.abs(np.linalg.norm(A1_hat, axis=0) - 1.0) > 1e-8):
        raise InvalidArgumentError("Recovered directions must have unit norm")
    k = A1_hat.shape[1]
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (n, k):
            raise InvalidArgumentError(f"Offsets of shape {offsets.shape} do not match ({n}, {k})")

    warnings: List[str] = []
    if offsets is None and not np.all(np.isin(y, (0.0, 1.0))):
        message = "Continuous labels in the Fourier stage; bias read-out is experimental"
        logger.warning(message)
        warnings.append(message)

    keep, weights = sample_weights(density.pdf(X), density.peak(), psi_fraction, window_exponent)
    if not np.any(keep):
        raise InsufficientDataError(f"All {n} samples fall below the psi floor")
    filtered = int(n - np.sum(keep))
    if filtered:
        logger.debug(f"psi floor skipped {filtered} of {n} samples")
    X_kept, y_kept = X[keep], y[keep]

    if epsilon is None:
        epsilon = max(1.0 / math.sqrt(n), epsilon_floor)
    area = surface_area_cap(d, epsilon) if d >= 2 else 2.0
    caps = [SphericalCap(A1_hat[:, l], epsilon) for l in range(k)]
    seeds = np.random.SeedSequence(seed).spawn(k)

    def _run(l: int) -> Tuple[ComplexStat, ProfileKernel]:
        labels = y_kept if offsets is None else y_kept - offsets[keep, l]
        return _column_statistic(X_kept, labels, weights, n, filtered, caps[l], seeds[l], phase_floor, spectrum.activation)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, range(k)))
    else:
        results = [_run(l) for l in range(k)]

    b1, alternative_b1 = np.zeros(k), np.ones(k)
    a2_magnitude, alternative_a2_magnitude = np.zeros(k), np.zeros(k)
    stats = []
    for l, (stat, kernel) in enumerate(results):
        stats.append(stat)
        for message in stat.warnings:
            logger.warning(f"Column {l}: {message}")
            warnings.append(f"column {l}: {message}")
        if not stat.reliable:
            continue
        stat.uncorrected_b1 = float(wrap_bias((np.angle(stat.value) - np.angle(spectrum.value)) / math.pi))
        b1[l], a2_magnitude[l] = read_branch(kernel, stat.value, 1.0)
        alternative_b1[l], alternative_a2_magnitude[l] = read_branch(kernel, stat.value, -1.0)
        logger.debug(f"Column {l}: window correction moved b1 from {stat.uncorrected_b1:.4f} to {b1[l]:.4f}")
    logger.info(f"Estimated {k} biases from {n - filtered} samples (epsilon={epsilon:.3g})")
    return BiasEstimate(
        b1=b1,
        a2_magnitude=a2_magnitude,
        alternative_b1=alternative_b1,
        alternative_a2_magnitude=alternative_a2_magnitude,
        stats=stats,
        epsilon=epsilon,
        cap_area=area,
        warnings=warnings,
    )
