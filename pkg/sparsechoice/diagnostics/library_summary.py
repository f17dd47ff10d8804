"""Helpers for inspecting a built library matrix."""

from __future__ import annotations

from typing import Any, Dict, List, Tuple

import numpy as np

from sparsechoice.featlib import LibraryMatrix

__all__ = [
    "compute_library_stats",
    "duplicate_columns",
]


def duplicate_columns(library: LibraryMatrix) -> List[Tuple[str, str]]:
    """Name pairs of identical raw columns, in library order; -0.0 matches 0.0.

    Duplicates are reported only; removing them would change the solver geometry.
    """

    seen: Dict[bytes, str] = {}
    pairs: List[Tuple[str, str]] = []
    raw = np.ascontiguousarray(library.raw_values) + 0.0  # folds -0.0 into 0.0 before hashing bytes
    for j, name in enumerate(library.names):
        key = raw[:, j].tobytes()
        if key in seen:
            pairs.append((seen[key], name))
        else:
            seen[key] = name
    return pairs


def compute_library_stats(library: LibraryMatrix) -> Dict[str, Any]:
    """Aggregate column metrics of ``library``."""

    raw = library.raw_values
    finite = np.isfinite(raw).all(axis=0)
    zero = ~raw.any(axis=0)
    norms = np.asarray(library.norms, dtype=float)
    usable = norms[finite & ~zero & np.isfinite(norms)]

    stats = {
        "rows": library.rows,
        "columns": library.columns,
        "scaling": library.scaling,
        "zero_columns": [library.names[j] for j in np.flatnonzero(zero)],
        "non_finite_columns": [library.names[j] for j in np.flatnonzero(~finite)],
        "duplicate_pairs": duplicate_columns(library),
        "min_norm": float(usable.min()) if usable.size else 0.0,
        "max_norm": float(usable.max()) if usable.size else 0.0,
    }

    return stats
