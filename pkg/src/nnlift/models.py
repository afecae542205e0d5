"""
Pydantic models for NN-LIFT runs.

This module defines the data models used for validating run configurations,
dataset headers, stored network parameters and experiment reports.
"""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, root_validator, validator

from .config import (
    CAP_EPSILON_FLOOR,
    DATASET_VERSION,
    DEFAULT_HOLDOUT_FRACTION,
    DEFAULT_LAMBDA_MULTIPLIERS,
    DEFAULT_POWER_ITERATIONS,
    DEFAULT_POWER_TOL,
    DEFAULT_PSI_FRACTION,
    DEFAULT_REFINE_PASSES,
    DEFAULT_RESTARTS_PER_RANK,
    DEFAULT_RISK_SAMPLES,
    DEFAULT_SVD_TRIALS,
    DEFAULT_WINDOW_EXPONENT,
    EIGENVALUE_FLOOR,
    PHASE_MAGNITUDE_FLOOR,
    REPORT_SCHEMA_VERSION,
)


class Activation(str, Enum):
    """Supported hidden-layer activations."""
    STEP = "step"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    LINEAR = "linear"


class LabelMode(str, Enum):
    """How labels are drawn from the network output."""
    BINARY = "binary"
    CONTINUOUS = "continuous"


class TargetKind(str, Enum):
    """Synthetic target families."""
    REALIZABLE = "realizable"
    KERNEL = "kernel"


class Whitening(str, Enum):
    """Source of the second-order moment used for whitening."""
    SCORE = "score"
    CONTRACTION = "contraction"


class Mode(str, Enum):
    """CLI subcommands."""
    GEN = "gen"
    TRAIN = "train"
    EVAL = "eval"
    SWEEP = "sweep"


class SweepVariable(str, Enum):
    """Quantities a sweep may vary."""
    N = "n"
    K = "k"


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class PowerConfig(BaseModel):
    """Settings of the whitened tensor power method."""
    n_iter: int = Field(DEFAULT_POWER_ITERATIONS, ge=1, description="Power updates per restart (N)")
    n_restarts: Optional[int] = Field(None, ge=1, description="Restarts per component (R); 10*k when unset")
    tol: float = Field(DEFAULT_POWER_TOL, gt=0.0)
    seed: Optional[int] = Field(None, ge=0, description="Derived from the run seed when unset")
    svd_trials: int = Field(DEFAULT_SVD_TRIALS, ge=1)
    eigen_floor: float = Field(EIGENVALUE_FLOOR, gt=0.0)
    whitening: Whitening = Whitening.SCORE
    workers: int = Field(1, ge=1)

    def restarts_for(self, k: int) -> int:
        """Number of restarts used for a rank-k decomposition."""
        return self.n_restarts if self.n_restarts is not None else DEFAULT_RESTARTS_PER_RANK * k

    class Config:
        extra = "forbid"


class DataSettings(BaseModel):
    """Synthetic data description."""
    target: TargetKind = TargetKind.REALIZABLE
    d: int = Field(..., ge=1, description="Input dimension")
    k: int = Field(..., ge=1, description="Number of hidden units")
    n: int = Field(..., gt=0, description="Number of samples")
    sigma_x: float = Field(1.0, gt=0.0)
    activation: Activation = Activation.STEP
    label_mode: LabelMode = LabelMode.CONTINUOUS
    sigma_noise: float = Field(0.01, ge=0.0)
    kernel_components: int = Field(4, ge=1)

    @root_validator(skip_on_failure=True)
    def validate_activation(cls, values):
        if values.get("label_mode") is LabelMode.BINARY and values.get("activation") is Activation.LINEAR:
            raise ValueError("binary labels need an activation bounded in [0, 1]")
        return values

    class Config:
        extra = "forbid"


class FourierSettings(BaseModel):
    """Fourier phase estimation settings."""
    epsilon: Optional[float] = Field(None, gt=0.0, lt=2 ** 0.5, description="Cone parameter; 1/sqrt(n) when unset")
    epsilon_floor: float = Field(CAP_EPSILON_FLOOR, gt=0.0)
    psi_fraction: float = Field(DEFAULT_PSI_FRACTION, gt=0.0, le=1.0)
    phase_floor: float = Field(PHASE_MAGNITUDE_FLOOR, ge=0.0)
    window_exponent: float = Field(DEFAULT_WINDOW_EXPONENT, ge=0.0, le=1.0, description="gamma in the weights (p / peak)^gamma / p")
    refine_passes: int = Field(DEFAULT_REFINE_PASSES, ge=0, description="Bias re-reads against the fitted network")
    workers: int = Field(1, ge=1)

    class Config:
        extra = "forbid"


class RegressionSettings(BaseModel):
    """Ridge regression settings."""
    lambda_multipliers: List[float] = Field(default_factory=lambda: list(DEFAULT_LAMBDA_MULTIPLIERS))
    lambda_grid: Optional[List[float]] = Field(None, description="Absolute lambda values overriding the multipliers")
    holdout_fraction: float = Field(DEFAULT_HOLDOUT_FRACTION, gt=0.0, lt=1.0)

    @validator("lambda_multipliers", "lambda_grid", pre=True)
    def split_lists(cls, v):
        return _split_list(v)

    @validator("lambda_multipliers", "lambda_grid")
    def validate_grid(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError("lambda grid must not be empty")
        if any(value < 0 for value in v):
            raise ValueError("lambda values must be non-negative")
        return v

    class Config:
        extra = "forbid"


class SweepSettings(BaseModel):
    """Parameter sweep description."""
    variable: SweepVariable = SweepVariable.N
    values: List[int] = Field(...)
    seeds: List[int] = Field(...)
    workers: int = Field(1, ge=1)
    record_timings: bool = True

    @validator("values", "seeds", pre=True)
    def split_lists(cls, v):
        return _split_list(v)

    @validator("values", "seeds")
    def validate_nonempty(cls, v):
        if not v:
            raise ValueError("sweep lists must not be empty")
        return v

    class Config:
        extra = "forbid"


class PathSettings(BaseModel):
    """Input and output locations."""
    dataset: Optional[str] = None
    output_dir: str = "output"
    model: Optional[str] = None
    csv: Optional[str] = None

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    """Complete run description for one CLI invocation."""
    mode: Mode
    label: str = "nnlift"
    seed: int = Field(0, ge=0)
    risk_samples: int = Field(DEFAULT_RISK_SAMPLES, ge=2)
    data: DataSettings
    decomposition: PowerConfig = Field(default_factory=PowerConfig)
    fourier: FourierSettings = Field(default_factory=FourierSettings)
    regression: RegressionSettings = Field(default_factory=RegressionSettings)
    sweep: Optional[SweepSettings] = None
    paths: PathSettings = Field(default_factory=PathSettings)

    @root_validator(skip_on_failure=True)
    def validate_mode(cls, values):
        mode = values.get("mode")
        if mode is Mode.SWEEP and values.get("sweep") is None:
            raise ValueError("sweep mode needs a [sweep] section")
        return values

    class Config:
        extra = "forbid"


class NetworkRecord(BaseModel):
    """Serialized two-layer network parameters."""
    A1: List[List[float]]
    b1: List[float]
    a2: List[float]
    b2: float
    activation: Activation

    @validator("b1")
    def validate_b1(cls, v):
        if any(abs(value) > 1.0 + 1e-12 for value in v):
            raise ValueError("first-layer biases must lie in [-1, 1]")
        return v

    class Config:
        extra = "forbid"


class KernelComponentRecord(BaseModel):
    """One Gaussian-kernel component g * exp(-||alpha (x + beta)||^2 / 2)."""
    alpha: float = Field(..., gt=0.0)
    beta: List[float]
    weight: float

    class Config:
        extra = "forbid"


class KernelTargetRecord(BaseModel):
    """Serialized kernel-mixture target."""
    components: List[KernelComponentRecord]

    class Config:
        extra = "forbid"


class DensityDescriptor(BaseModel):
    """Enough information to rebuild the input density."""
    kind: str = Field(..., description="gaussian or gaussian_mixture")
    dim: int = Field(..., ge=1)
    variance: Optional[float] = Field(None, gt=0.0)
    weights: Optional[List[float]] = None
    means: Optional[List[List[float]]] = None
    variances: Optional[List[float]] = None

    @validator("kind")
    def validate_kind(cls, v):
        if v not in ("gaussian", "gaussian_mixture"):
            raise ValueError(f"unknown density kind: {v}")
        return v

    class Config:
        extra = "forbid"


class GeneratorProvenance(BaseModel):
    """How a dataset was produced, including the ground truth."""
    generator: str
    seed: int
    target: TargetKind
    label_mode: Optional[LabelMode] = None
    sigma_noise: Optional[float] = None
    params: Optional[NetworkRecord] = None
    kernel: Optional[KernelTargetRecord] = None
    package_version: str

    @root_validator(skip_on_failure=True)
    def validate_ground_truth(cls, values):
        if values.get("target") is TargetKind.KERNEL and values.get("params") is not None:
            raise ValueError("kernel datasets carry no network parameters")
        return values

    class Config:
        extra = "forbid"


class DatasetHeader(BaseModel):
    """Header of a binary dataset file."""
    version: int = DATASET_VERSION
    d: int = Field(..., ge=1)
    n: int = Field(..., gt=0)
    label_arity: int = Field(1, ge=1)
    density: DensityDescriptor
    provenance: Optional[GeneratorProvenance] = None

    @root_validator(skip_on_failure=True)
    def validate_density_dim(cls, values):
        if values["density"].dim != values["d"]:
            raise ValueError("density dimension does not match d")
        return values

    class Config:
        extra = "forbid"


class ExperimentReport(BaseModel):
    """Metrics of one training run."""
    schema_version: int = REPORT_SCHEMA_VERSION
    label: str
    status: str = "ok"
    target: Optional[TargetKind] = None
    d: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    n: int = Field(..., ge=0)
    seed: int = 0
    activation: Optional[Activation] = None
    column_errors: List[float] = Field(default_factory=list)
    max_column_error: Optional[float] = Field(None, ge=0.0)
    mean_column_error: Optional[float] = Field(None, ge=0.0)
    bias_errors: List[float] = Field(default_factory=list)
    max_bias_error: Optional[float] = Field(None, ge=0.0)
    a2_errors: List[float] = Field(default_factory=list)
    b2_error: Optional[float] = Field(None, ge=0.0)
    risk: Optional[float] = Field(None, ge=0.0)
    risk_se: Optional[float] = Field(None, ge=0.0)
    target_variance: Optional[float] = Field(None, ge=0.0)
    empirical_mse: Optional[float] = Field(None, ge=0.0)
    selected_lambda: Optional[float] = Field(None, ge=0.0)
    holdout_mse: Optional[float] = Field(None, ge=0.0)
    sweep_variable: Optional[str] = None
    sweep_value: Optional[float] = None
    warnings: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)

    @root_validator(skip_on_failure=True)
    def validate_risk_pair(cls, values):
        if values.get("risk") is not None and values.get("risk_se") is None:
            raise ValueError("risk needs a standard error")
        return values

    class Config:
        extra = "forbid"
        schema_extra = {
            "example": {
                "label": "realizable-d10-k5",
                "status": "ok",
                "target": "realizable",
                "d": 10,
                "k": 5,
                "n": 100000,
                "seed": 3,
                "activation": "step",
                "column_errors": [0.02, 0.03, 0.05, 0.04, 0.02],
                "max_column_error": 0.05,
                "mean_column_error": 0.032,
                "risk": 0.004,
                "risk_se": 0.0002,
            }
        }
