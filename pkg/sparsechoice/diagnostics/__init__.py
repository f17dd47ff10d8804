"""Diagnostics helpers for sparsechoice."""

from .library_summary import compute_library_stats, duplicate_columns  # noqa: F401
