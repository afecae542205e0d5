"""
Converter module for report and model formats.
This module turns experiment reports into CSV rows and JSON documents and
serializes fitted networks.
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from .config import SWEEP_COLUMNS, SWEEP_SCHEMA_VERSION
from .errors import InvalidArgumentError
from .models import ExperimentReport, NetworkRecord


def sweep_columns(schema_version: int = SWEEP_SCHEMA_VERSION) -> List[str]:
    """
    Get the frozen CSV column order of a schema version.

    Raises:
        InvalidArgumentError: For an unknown schema version
    """
    if schema_version not in SWEEP_COLUMNS:
        raise InvalidArgumentError(f"Unknown CSV schema version: {schema_version}")
    return list(SWEEP_COLUMNS[schema_version])


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if hasattr(value, "value"):
        return value.value
    return value


def report_to_row(
    report: ExperimentReport,
    wall_time: Optional[float] = None,
    schema_version: int = SWEEP_SCHEMA_VERSION,
) -> Dict[str, Any]:
    """
    Flatten a report into one CSV row.

    Args:
        report: Experiment report
        wall_time: Seconds spent on the run; left empty when None
        schema_version: CSV schema version

    Returns:
        Mapping from column name to cell value
    """
    values = report.dict()
    values["schema_version"] = schema_version
    values["wall_time"] = wall_time
    return {column: _cell(values.get(column)) for column in sweep_columns(schema_version)}


def write_rows(rows: Iterable[Dict[str, Any]], path: Union[str, Path], schema_version: int = SWEEP_SCHEMA_VERSION) -> None:
    """Write rows under the schema's header."""
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=sweep_columns(schema_version), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def report_to_json(report: ExperimentReport) -> str:
    """Full report as indented JSON with sorted keys."""
    return json.dumps(json.loads(report.json()), indent=2, sort_keys=True)


def params_to_json(record: NetworkRecord) -> str:
    return json.dumps(json.loads(record.json()), indent=2)


def params_from_json(text: str) -> NetworkRecord:
    """
    Parse a model file written by params_to_json.

    Raises:
        ValidationError: If the document is not a valid network record
    """
    return NetworkRecord(**json.loads(text))
