"""
Test configuration and fixtures for the NN-LIFT library and command line.
"""
import os
import tempfile
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Dict, Optional

import numpy as np
import pytest

from src.nnlift.models import PowerConfig, Whitening
from src.nnlift.repositories import RunRepository
from src.nnlift.score import GaussianDensity
from src.nnlift.tensor_core import symmetric_rank_sum

# Sample data for tests
SAMPLE_REPORT = {
    "label": "realizable-d3-k1",
    "status": "ok",
    "target": "realizable",
    "d": 3,
    "k": 1,
    "n": 20000,
    "seed": 7,
    "activation": "step",
    "column_errors": [0.02],
    "max_column_error": 0.02,
    "mean_column_error": 0.02,
    "risk": 0.004,
    "risk_se": 0.0002,
}

SAMPLE_INI = """
[experiment]
mode = train
label = smoke
seed = 3
risk_samples = 2000

[data]
d = 3
k = 1
n = 20000
sigma_x = 2.0
activation = step
label_mode = continuous
sigma_noise = 0.01

[decomposition]
whitening = contraction
n_restarts = 5

[regression]
lambda_multipliers = 0.0, 0.0001, 1.0
"""


def random_unit_columns(rng: np.random.Generator, d: int, k: int, max_condition: float = 10.0) -> np.ndarray:
    """Unit-norm columns with condition number at most max_condition (k <= d)."""
    while True:
        A = rng.standard_normal((d, k))
        A /= np.linalg.norm(A, axis=0, keepdims=True)
        if k > d or np.linalg.cond(A) <= max_condition:
            return A


@pytest.fixture
def rng():
    """Seeded generator shared by a test."""
    return np.random.default_rng(20240611)


@pytest.fixture
def gaussian3():
    return GaussianDensity(dim=3, variance=1.0)


@pytest.fixture
def unit_columns():
    """Factory for well-conditioned unit-norm column matrices."""
    return random_unit_columns


@pytest.fixture
def synthetic_moments(rng):
    """Noiseless d=6, k=4 moments M2 = A diag(lam2) A^T and T = sum lam3 a^{x3}."""
    A = random_unit_columns(rng, 6, 4)
    lam2 = np.array([1.0, 1.5, 2.0, 0.8])
    lam3 = np.array([1.0, 2.0, 0.5, 1.5])
    return A, lam2, lam3, symmetric_rank_sum(A, lam2, order=2), symmetric_rank_sum(A, lam3, order=3)


@pytest.fixture
def power_config():
    return PowerConfig(seed=0, whitening=Whitening.SCORE)


@pytest.fixture
def test_db():
    """Create a temporary database file for testing."""
    with NamedTemporaryFile(delete=False, suffix=".json") as temp_file:
        temp_db_path = temp_file.name

    yield temp_db_path

    # Cleanup after tests
    if os.path.exists(temp_db_path):
        os.unlink(temp_db_path)


@pytest.fixture
def repo(test_db):
    """Create a repository instance with the test database."""
    repository = RunRepository(test_db)
    yield repository
    repository.close()


@pytest.fixture
def workdir():
    """Temporary directory removed after the test."""
    with tempfile.TemporaryDirectory() as path:
        yield Path(path)


@pytest.fixture
def sample_report():
    return dict(SAMPLE_REPORT)


@pytest.fixture
def config_file(workdir):
    """Write the sample configuration, with line replacements and extra sections, and return its path."""

    def write(replace: Optional[Dict[str, str]] = None, extra: str = "", name: str = "run.ini") -> Path:
        text = SAMPLE_INI
        for old, new in (replace or {}).items():
            text = text.replace(old, new)
        path = workdir / name
        path.write_text(text + extra, encoding="utf-8")
        return path

    return write
