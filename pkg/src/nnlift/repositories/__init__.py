"""
Repository module initialization.

This package contains the run-history store for experiment reports.
"""

from .tinydb_repo import RunRepository

__all__ = ['RunRepository']
