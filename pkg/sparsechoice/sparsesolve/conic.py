"""Interior-point solve of the ball-constrained problem through cvxpy.

Slower than ADMM per problem but insensitive to conditioning, so it serves as
``method="conic"`` and as the fallback when ADMM stops at its iteration cap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from sparsechoice.config import SolverSettings
from sparsechoice.errors import SolverError

logger = logging.getLogger(__name__)

ACCEPTED = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
# interior points carry tiny non-zeros everywhere; support for polishing is read above this
CONIC_ACTIVITY = 1e-6


@dataclass
class ConicState:
    x: np.ndarray
    iterations: int
    converged: bool
    status: str


def conic(A: np.ndarray, o: np.ndarray, pi: float, weights: np.ndarray, settings: SolverSettings) -> ConicState:
    x = cp.Variable(A.shape[1])
    problem = cp.Problem(
        cp.Minimize(weights @ cp.abs(x)),
        [cp.norm(A @ x - o, 2) <= pi],
    )
    try:
        problem.solve(solver=settings.conic_solver)
    except cp.error.SolverError as exc:
        raise SolverError(f"conic solve failed: {exc}") from exc
    if x.value is None or problem.status not in ACCEPTED:
        raise SolverError(f"conic solve ended with status {problem.status!r}")

    stats = problem.solver_stats
    iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
    if problem.status != cp.OPTIMAL:
        logger.warning("conic solve is %s", problem.status)
    return ConicState(np.asarray(x.value, dtype=float), iterations, problem.status == cp.OPTIMAL, problem.status)
