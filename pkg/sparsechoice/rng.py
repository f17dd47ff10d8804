"""Portable seeded random streams.

All randomness goes through numpy's counter-based ``Philox`` bit generator keyed
by a :class:`numpy.random.SeedSequence` built from ``(seed, stream, index)``.
Every row (and every repeated run) therefore owns an independent stream that
does not depend on evaluation order or thread scheduling.
"""

from __future__ import annotations

import numpy as np

COVARIATE_STREAM = 0
CHOICE_STREAM = 1

_UINT64_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _UINT64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the sub-stream ``path`` of ``seed``."""

    return np.random.Generator(np.random.Philox(np.random.SeedSequence([check_seed(seed), *path])))


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of repeated run ``index`` under ``master_seed``."""

    state = np.random.SeedSequence([check_seed(master_seed), index]).generate_state(1, np.uint64)
    return int(state[0])
