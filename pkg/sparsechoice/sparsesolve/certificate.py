"""First-order optimality audit for the ball-constrained problem."""

from __future__ import annotations

import numpy as np

from sparsechoice.sparsesolve.results import OptimalityCertificate

DEFAULT_TOLERANCE = 1e-4


def verify_optimality(
    F,
    o: np.ndarray,
    zeta: np.ndarray,
    pi: float,
    weights: np.ndarray | None = None,
    activity_threshold: float = 1e-8,
    tolerance: float = DEFAULT_TOLERANCE,
) -> OptimalityCertificate:
    """Check the KKT conditions of ``min sum(w|z|) s.t. ||F z - o|| <= pi`` at ``zeta``.

    The dual is ``nu = -lam (F zeta - o)`` with ``lam >= 0`` fitted by least squares
    on the active set.  Stationarity is measured relative to the weights:
    ``|(F^T nu)_j / w_j - sign(zeta_j)|`` on the support and
    ``max(0, |(F^T nu)_j| / w_j - 1)`` elsewhere.  The support is read on
    column-normalised coefficients.  Never raises for well-shaped input; a failed
    check is reported through ``passed``.
    """

    F = np.asarray(getattr(F, "values", F), dtype=float)
    o = np.asarray(o, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    k = F.shape[1]
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)

    with np.errstate(all="ignore"):
        norms = np.linalg.norm(F, axis=0)
        scaled = zeta * np.where(norms > 0, norms, 1.0)
        r = F @ zeta - o
        res = float(np.linalg.norm(r))
    feasibility = max(0.0, res - pi)

    scale = max(1.0, float(np.max(np.abs(scaled), initial=0.0)))
    support = np.abs(scaled) > activity_threshold * scale
    active_set = tuple(int(j) for j in np.flatnonzero(support))
    sigma = np.sign(zeta)

    with np.errstate(all="ignore"):
        g = (F.T @ r) / w  # F^T nu = -lam * F^T r
    lam = 0.0
    if support.any() and res > 0:
        gs = g[support]
        denom = float(gs @ gs)
        if denom > 0:
            lam = max(0.0, -float(gs @ sigma[support]) / denom)

    with np.errstate(all="ignore"):
        dual = -lam * g
        on = np.abs(dual[support] - sigma[support])
        off = np.maximum(np.abs(dual[~support]) - 1.0, 0.0)
    stationarity = float(max(np.max(on, initial=0.0), np.max(off, initial=0.0)))
    if not np.isfinite(stationarity):
        stationarity = np.inf

    worst = max(stationarity, feasibility)
    return OptimalityCertificate(
        passed=bool(worst <= tolerance),
        worst_violation=float(worst),
        stationarity_violation=stationarity,
        feasibility_violation=float(feasibility),
        multiplier=lam,
        active_set=active_set,
    )
