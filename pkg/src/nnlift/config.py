"""
Configuration module for the NN-LIFT trainer.
This module contains all constants and configuration parameters used throughout the library.
"""
import math
import os

# Environment settings
OUTPUT_DIR = os.environ.get('NNLIFT_OUTPUT_DIR')
LOG_LEVEL = os.environ.get('NNLIFT_LOG_LEVEL', 'INFO').upper()
HISTORY_DB_NAME = os.environ.get('NNLIFT_HISTORY_DB', 'runs.json')
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Score functions
SUPPORTED_SCORE_ORDERS = (1, 2, 3)
FD_RELATIVE_STEP = 1e-4  # h = FD_RELATIVE_STEP * (1 + |x_i|)

# Moment accumulation
DEFAULT_BATCH_SIZE = 8192

# Tensor decomposition
DEFAULT_POWER_ITERATIONS = 100
DEFAULT_RESTARTS_PER_RANK = 10  # R = 10 * k when not given
DEFAULT_POWER_TOL = 1e-10
DEFAULT_SVD_TRIALS = 10
EIGENVALUE_FLOOR = 1e-10
DEGENERATE_ITERATE_NORM = 1e-14
COEFFICIENT_FLOOR = 1e-12

# Fourier bias estimation
CAP_RADIUS = 0.5
DEFAULT_PSI_FRACTION = 1e-6  # psi = fraction * peak density
DEFAULT_WINDOW_EXPONENT = 2.0 / 3.0  # sample weight (p / peak)^gamma / p
DEFAULT_REFINE_PASSES = 2
PROFILE_BINS = 4096
READOUT_GRID_POINTS = 801
CAP_EPSILON_FLOOR = 1e-3
PHASE_MAGNITUDE_FLOOR = 1e-12
SPECTRUM_FREQUENCY = 0.5
SPECTRUM_RHOS = (1e-2, 1e-3, 1e-4)

# Closed forms of Sigma(1/2) = int sigma(t) exp(-j 2 pi t / 2) dt, checked by
# scripts/fourier_constants.py against the regularized oracle
ACTIVATION_SPECTRA = {
    "step": complex(0.0, -1.0 / math.pi),
    "sigmoid": complex(0.0, -math.pi / math.sinh(math.pi ** 2)),
    "tanh": complex(0.0, -math.pi / (2.0 * math.sinh(math.pi ** 2 / 2.0))),
}

# Ridge regression
DEFAULT_LAMBDA_MULTIPLIERS = (0.0, 1e-6, 1e-4, 1e-2, 1.0, 1e2)
DEFAULT_HOLDOUT_FRACTION = 0.2
SIGN_SEARCH_EXHAUSTIVE_LIMIT = 256
SIGN_SEARCH_SWEEPS = 2

# Data generation
BINARY_A2_RANGE = (0.5, 1.0)
BINARY_B2_RANGE = (0.0, 0.5)
CONTINUOUS_B2_RANGE = (-0.1, 0.1)
# Kernel widths are drawn in units of sigma_x * sqrt(d), shifts in units of sigma_x
KERNEL_SCALE_RANGE = (0.5, 1.5)
KERNEL_SHIFT_SCALE = 1.0

# Risk evaluation
DEFAULT_RISK_SAMPLES = 10_000

# File formats
DATASET_MAGIC = b"NNLIFTDS"
DATASET_VERSION = 1
REPORT_SCHEMA_VERSION = 1
SWEEP_SCHEMA_VERSION = 1

SWEEP_COLUMNS = {
    1: [
        "schema_version",
        "sweep_variable",
        "sweep_value",
        "seed",
        "status",
        "d",
        "k",
        "n",
        "max_column_error",
        "mean_column_error",
        "max_bias_error",
        "risk",
        "risk_se",
        "wall_time",
    ]
}

# Exit codes by failure stage
EXIT_CODES = {
    "ok": 0,
    "validation": 1,
    "moments": 2,
    "decomposition": 3,
    "fourier": 4,
    "regression": 5,
}
