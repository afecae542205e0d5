"""
TinyDB run history.

Every train, eval and sweep run appends its validated ExperimentReport to a
JSON document store next to the run outputs.
"""

import json
from datetime import datetime
from typing import Any, Dict, List, Optional, Union

from tinydb import Query, TinyDB

from ..models import ExperimentReport


class RunRepository:
    """Experiment report history stored with TinyDB."""

    def __init__(self, db_path="runs.json"):
        """
        Open (or create) the history file.

        Args:
            db_path: Path to the TinyDB JSON file
        """
        self.db = TinyDB(db_path)

    def close(self) -> None:
        self.db.close()

    def insert_report(self, report: Union[ExperimentReport, Dict[str, Any]]) -> int:
        """
        Validate and append a report.

        Args:
            report: ExperimentReport or a dictionary with its fields

        Returns:
            ID of the inserted document

        Raises:
            ValidationError: If the data does not match the report schema
        """
        validated = report if isinstance(report, ExperimentReport) else ExperimentReport(**report)
        document = json.loads(validated.json())
        document["created"] = datetime.now().isoformat(timespec="seconds")
        return self.db.insert(document)

    def get_latest_report(self, label: str) -> Optional[Dict[str, Any]]:
        """
        Most recently inserted report with the given label.

        Returns:
            The report or None if the label has no history
        """
        Report = Query()
        reports = self.db.search(Report.label == label)
        if not reports:
            return None
        return max(reports, key=lambda doc: doc.doc_id)

    def get_history(self, label: str) -> List[Dict[str, Any]]:
        """All reports with the given label in insertion order."""
        Report = Query()
        return sorted(self.db.search(Report.label == label), key=lambda doc: doc.doc_id)

    def get_reports_by_status(self, status: str) -> List[Dict[str, Any]]:
        """Reports whose status matches, e.g. ok or a failed stage."""
        Report = Query()
        return self.db.search(Report.status == status)

    def get_reports_by_sweep_value(self, name: str, value: float) -> List[Dict[str, Any]]:
        """
        Reports produced by one point of a sweep.

        Args:
            name: Swept variable (n or k)
            value: Value of the sweep point
        """
        Report = Query()
        return self.db.search((Report.sweep_variable == name) & (Report.sweep_value == float(value)))
