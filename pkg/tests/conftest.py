import itertools
import os

import numpy as np
import pytest

from sparsechoice import observability

ACCEPTANCE_ENV = "RUN_ACCEPTANCE"


def pytest_collection_modifyitems(config, items):
    acceptance = pytest.mark.acceptance
    integration = pytest.mark.integration
    unit = pytest.mark.unit
    slow = pytest.mark.slow

    for item in items:
        nodeid = item.nodeid.replace("\\", "/").lower()

        # Heuristic labeling by path/name
        if "/acceptance/" in nodeid:
            item.add_marker(acceptance)
            item.add_marker(slow)
        elif "/integration/" in nodeid:
            item.add_marker(integration)
        else:
            item.add_marker(unit)

    # Full-size reproductions take minutes; everything else runs by default
    run_acceptance = os.environ.get(ACCEPTANCE_ENV) == "1"
    skip_acceptance = pytest.mark.skip(reason=f"acceptance tests require {ACCEPTANCE_ENV}=1")

    for item in items:
        if item.get_closest_marker("acceptance") and not run_acceptance:
            item.add_marker(skip_acceptance)


@pytest.fixture(autouse=True)
def event_log(tmp_path, monkeypatch):
    """Keep structured events out of the working tree."""
    monkeypatch.setattr(observability, "EPISODES_DIR", str(tmp_path / "episodes"))
    path = tmp_path / "events.jsonl"
    observability.configure_event_log(path)
    yield path
    observability.configure_event_log(None)


def brute_force_l1(F, o, pi, max_support=None):
    """Smallest L1 norm over least-squares fits on every support that meets the ball.

    Exact for the vanishing-radius instances used in the oracle tests, where the
    feasible set collapses onto least-squares points.
    """
    F = np.asarray(F, dtype=float)
    J, k = F.shape
    max_support = min(k, J) if max_support is None else max_support
    best = 0.0 if np.linalg.norm(o) <= pi else np.inf
    best_zeta = np.zeros(k)
    for size in range(1, max_support + 1):
        for support in itertools.combinations(range(k), size):
            cols = list(support)
            coef, *_ = np.linalg.lstsq(F[:, cols], o, rcond=None)
            if np.linalg.norm(F[:, cols] @ coef - o) > pi * (1 + 1e-9) + 1e-12:
                continue
            value = float(np.abs(coef).sum())
            if value < best:
                best = value
                best_zeta = np.zeros(k)
                best_zeta[cols] = coef
    return best, best_zeta


@pytest.fixture
def l1_oracle():
    return brute_force_l1


def planted_instance(seed, J=30, k=8, s=2):
    """Gaussian library with an ``s``-sparse planted solution of magnitude >= 1."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((J, k))
    support = np.sort(rng.choice(k, size=s, replace=False))
    zeta = np.zeros(k)
    zeta[support] = rng.uniform(1.0, 3.0, size=s) * rng.choice([-1.0, 1.0], size=s)
    return F, F @ zeta, zeta


@pytest.fixture
def planted():
    return planted_instance
