#!/usr/bin/env python3
"""
Check the shipped Sigma(1/2) constants against the regularized Fourier oracle
"""
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from src.nnlift.config import ACTIVATION_SPECTRA, SPECTRUM_RHOS  # noqa: E402
from src.nnlift.fourier_bias import activation_spectrum_oracle  # noqa: E402

TOLERANCE = 1e-2


def main() -> int:
    """Print shipped and extrapolated values; exit 1 if any differ beyond tolerance"""
    rows = []
    failures = 0
    for name, shipped in ACTIVATION_SPECTRA.items():
        oracle = activation_spectrum_oracle(name, SPECTRUM_RHOS)
        relative = abs(oracle - shipped) / abs(shipped)
        failures += relative > TOLERANCE
        rows.append({
            "activation": name,
            "shipped": [shipped.real, shipped.imag],
            "oracle": [oracle.real, oracle.imag],
            "relative_error": relative,
        })
    print(json.dumps(rows, indent=2))
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
