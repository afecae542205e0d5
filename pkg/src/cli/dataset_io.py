"""
Binary dataset files.

Layout: the 8-byte magic, a little-endian uint32 format version, a uint32
header length, the UTF-8 JSON header, then n rows of d inputs followed by the
label(s), all little-endian float64.
"""
import csv
import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from src.nnlift.config import DATASET_MAGIC, DATASET_VERSION
from src.nnlift.errors import DatasetFormatError
from src.nnlift.models import DatasetHeader
from src.nnlift.pipeline import Dataset
from src.nnlift.score import density_from_descriptor

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<8sII")
_FLOAT = np.dtype("<f8")


def atomic_write(path: Union[str, Path], payload: Union[bytes, str]) -> None:
    """Write a file through a temporary sibling so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_dataset(dataset: Dataset) -> bytes:
    header = json.dumps(json.loads(dataset.header().json()), sort_keys=True, separators=(",", ":")).encode("utf-8")
    labels = dataset.y.reshape(dataset.n, -1)
    body = np.ascontiguousarray(np.hstack([dataset.X, labels]), dtype=_FLOAT).tobytes()
    return _PREFIX.pack(DATASET_MAGIC, DATASET_VERSION, len(header)) + header + body


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset file; identical datasets give identical bytes."""
    atomic_write(path, encode_dataset(dataset))
    logger.info(f"Wrote dataset with {dataset.n} rows to {path}")
    return Path(path)


def decode_dataset(raw: bytes) -> Dataset:
    """
    Parse dataset bytes.

    Raises:
        DatasetFormatError: On a bad magic string, version, header or body size
    """
    if len(raw) < _PREFIX.size:
        raise DatasetFormatError("File is too short to hold a dataset header")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != DATASET_MAGIC:
        raise DatasetFormatError("Not an NN-LIFT dataset (bad magic string)")
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"Unsupported dataset version {version}")
    start = _PREFIX.size
    try:
        header = DatasetHeader(**json.loads(raw[start:start + header_len].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError, TypeError) as e:
        raise DatasetFormatError(f"Corrupted dataset header: {e}") from e
    width = header.d + header.label_arity
    body = raw[start + header_len:]
    if len(body) != header.n * width * _FLOAT.itemsize:
        raise DatasetFormatError(f"Body holds {len(body)} bytes, expected {header.n} rows of {width} values")
    table = np.frombuffer(body, dtype=_FLOAT).reshape(header.n, width).astype(float)
    y = table[:, header.d] if header.label_arity == 1 else table[:, header.d:]
    return Dataset(
        X=table[:, :header.d],
        y=y,
        density=density_from_descriptor(header.density),
        provenance=header.provenance,
    )


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset file written by write_dataset."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DatasetFormatError(f"Cannot read dataset {path}: {e}") from e
    dataset = decode_dataset(raw)
    logger.info(f"Read dataset with {dataset.n} rows and dimension {dataset.d} from {path}")
    return dataset


def export_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Plain-text copy of a dataset: one row per sample, inputs then labels."""
    labels = dataset.y.reshape(dataset.n, -1)
    names = [f"x{i}" for i in range(dataset.d)]
    names += ["y"] if dataset.label_arity == 1 else [f"y{i}" for i in range(dataset.label_arity)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for x, label in zip(dataset.X, labels):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in label])
    logger.info(f"Exported {dataset.n} rows to {path}")
    return path
