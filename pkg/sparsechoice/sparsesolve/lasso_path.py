"""Penalised fallback: coordinate descent along a lambda path.

``min 0.5 ||A x - o||^2 + lam * sum(w * |x|)`` is solved for a geometric sequence of
penalties starting at the smallest value that zeroes every coefficient.  Once the
residual drops below ``pi`` the penalty is bisected (in log space) until the residual
sits in ``[(1 - tol) pi, pi]``; at that penalty the penalised and ball-constrained
problems share a minimiser.  Columns of ``A`` must have unit norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from sparsechoice.config import SolverSettings

logger = logging.getLogger(__name__)

BISECTION_STEPS = 100


@dataclass
class PathState:
    x: np.ndarray
    iterations: int
    converged: bool
    lam: float


def cd_lasso(
    A: np.ndarray,
    o: np.ndarray,
    lam: float,
    weights: np.ndarray,
    x0: np.ndarray,
    tolerance: float,
    max_sweeps: int,
) -> tuple[np.ndarray, int]:
    """Cyclic coordinate descent from ``x0``; returns ``(x, sweeps)``."""

    x = x0.copy()
    r = o - A @ x
    thresholds = lam * weights
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_dx = 0.0
        for j in range(x.size):
            a_j = A[:, j]
            old = x[j]
            rho_j = a_j @ r + old
            new = np.sign(rho_j) * max(abs(rho_j) - thresholds[j], 0.0)
            if new != old:
                r -= a_j * (new - old)
                x[j] = new
                max_dx = max(max_dx, abs(new - old))
        if max_dx <= tolerance * max(1.0, float(np.max(np.abs(x), initial=0.0))):
            break
    return x, sweeps


def lasso_path(A: np.ndarray, o: np.ndarray, pi: float, weights: np.ndarray, settings: SolverSettings) -> PathState:
    n = A.shape[1]
    lam_max = float(np.max(np.abs(A.T @ o) / weights))
    lambdas = lam_max * np.geomspace(1.0, settings.path_min_ratio, settings.path_length)

    def run(lam: float, start: np.ndarray) -> tuple[np.ndarray, float, int]:
        x, sweeps = cd_lasso(A, o, lam, weights, start, settings.cd_tolerance, settings.cd_max_sweeps)
        return x, float(np.linalg.norm(A @ x - o)), sweeps

    total = 0
    x_hi = np.zeros(n)  # solution at the last penalty whose residual exceeds pi
    lam_hi = lam_max
    bracket = None
    for lam in lambdas[1:]:
        x, res, sweeps = run(lam, x_hi)
        total += sweeps
        if res <= pi:
            bracket = (lam, x, res)
            break
        x_hi, lam_hi = x, lam

    if bracket is None:
        logger.warning("lasso path ended at lambda=%.3g without reaching pi=%.3g", lambdas[-1], pi)
        return PathState(x_hi, total, False, float(lambdas[-1]))

    lam_lo, x_lo, res_lo = bracket
    lower = (1.0 - settings.bisection_tol) * pi
    for _ in range(BISECTION_STEPS):
        if res_lo >= lower:
            return PathState(x_lo, total, True, lam_lo)
        lam_mid = float(np.sqrt(lam_lo * lam_hi))
        x, res, sweeps = run(lam_mid, x_lo)
        total += sweeps
        if res <= pi:
            lam_lo, x_lo, res_lo = lam_mid, x, res
        else:
            lam_hi = lam_mid
    return PathState(x_lo, total, res_lo >= lower, lam_lo)
