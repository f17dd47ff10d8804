from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from sparsechoice.config import SolverSettings
from sparsechoice.errors import InfeasibleError, NonFiniteColumnError, SolverError
from sparsechoice.observability import log_event
from sparsechoice.sparsesolve.admm import active_mask, admm, polish, restore_feasibility
from sparsechoice.sparsesolve.certificate import verify_optimality
from sparsechoice.sparsesolve.conic import CONIC_ACTIVITY, conic
from sparsechoice.sparsesolve.lasso_path import lasso_path
from sparsechoice.sparsesolve.results import CoefficientMatrix, SolveResult

logger = logging.getLogger(__name__)

# converged solves satisfy ||F z - o|| <= pi_eff * (1 + FEASIBILITY_RTOL) + abs tolerance
FEASIBILITY_RTOL = 1e-6


@dataclass(frozen=True)
class _Equilibrated:
    """Problem restricted to non-zero columns, each scaled to unit norm."""

    A: np.ndarray
    weights: np.ndarray
    norms: np.ndarray
    keep: np.ndarray  # boolean mask over the original columns

    def lift(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.keep.size)
        out[self.keep] = x / self.norms[self.keep]
        return out


def _matrix_and_labels(F, labels: Sequence[str] | None) -> tuple[np.ndarray, Sequence[str]]:
    values = np.asarray(getattr(F, "values", F), dtype=float)
    if values.ndim != 2:
        raise SolverError(f"library matrix must be 2-D, got shape {values.shape}")
    if labels is None:
        labels = getattr(F, "labels", None) or [f"column {j}" for j in range(values.shape[1])]
    return values, labels


def _equilibrate(F: np.ndarray, weights: np.ndarray, labels: Sequence[str]) -> _Equilibrated:
    bad = ~np.isfinite(F).all(axis=0)
    if bad.any():
        raise NonFiniteColumnError(labels[int(np.flatnonzero(bad)[0])])
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(F, axis=0)
    if not np.isfinite(norms).all():
        # norm overflow; rescale before squaring
        peak = np.max(np.abs(F), axis=0)
        safe = np.where(peak > 0, peak, 1.0)
        norms = np.linalg.norm(F / safe, axis=0) * safe
    keep = norms > 0
    A = F[:, keep] / norms[keep]
    return _Equilibrated(A, weights[keep] / norms[keep], norms, keep)


def _check_weights(weights, k: int) -> np.ndarray:
    if weights is None:
        return np.ones(k)
    w = np.asarray(weights, dtype=float)
    if w.shape != (k,):
        raise SolverError(f"weights must have shape ({k},), got {w.shape}")
    if not (np.isfinite(w).all() and (w > 0).all()):
        raise SolverError("weights must be finite and positive")
    return w


def min_feasible_pi(F, o: np.ndarray) -> float:
    """Distance from ``o`` to the column span of ``F``."""

    values, labels = _matrix_and_labels(F, None)
    problem = _equilibrate(values, np.ones(values.shape[1]), labels)
    return _least_squares_residual(problem.A, np.asarray(o, dtype=float))


def _least_squares_residual(A: np.ndarray, o: np.ndarray) -> float:
    if A.shape[1] == 0:
        return float(np.linalg.norm(o))
    x, *_ = linalg.lstsq(A, o)
    return float(np.linalg.norm(A @ x - o))


def _effective_pi(pi: float, min_pi: float, o: np.ndarray, settings: SolverSettings) -> float:
    tol = 1e-10 * max(1.0, float(np.linalg.norm(o)))
    if pi >= min_pi:
        return pi
    if pi >= min_pi - tol:
        return min_pi
    if settings.on_infeasible == "error":
        raise InfeasibleError(pi, min_pi)
    relaxed = min_pi * (1.0 + settings.relax_margin)
    logger.warning("pi=%.6g is below the minimal feasible pi=%.6g; relaxed to %.6g", pi, min_pi, relaxed)
    log_event("solve.relaxed", {"pi": pi, "min_feasible_pi": min_pi, "pi_effective": relaxed})
    return relaxed


def _finish(
    problem: _Equilibrated,
    o: np.ndarray,
    pi: float,
    x: np.ndarray,
    threshold: float,
    settings: SolverSettings,
    abs_tol: float,
) -> tuple[np.ndarray, bool]:
    """Polish on the detected support when that does not raise the objective, then restore feasibility."""

    polished = False
    if settings.polish:
        candidate = polish(problem.A, o, pi, problem.weights, x, threshold)
        if candidate is not None:
            objective = float(problem.weights @ np.abs(candidate))
            baseline = float(problem.weights @ np.abs(x))
            if np.linalg.norm(problem.A @ candidate - o) <= pi * (1 + 1e-9) + abs_tol and (
                objective <= baseline + 1e-6 * (1.0 + baseline)
            ):
                x, polished = candidate, True
    return restore_feasibility(problem.A, o, pi, x, threshold), polished


def solve_one(
    F,
    o: np.ndarray,
    settings: SolverSettings,
    weights: np.ndarray | None = None,
    labels: Sequence[str] | None = None,
    alternative: int | None = None,
) -> SolveResult:
    """Minimise ``sum(w |zeta|)`` subject to ``||F zeta - o||_2 <= pi``.

    ``F`` is an array or a :class:`~sparsechoice.featlib.LibraryMatrix` (its
    ``values`` are used).  ``alternative`` only tags the diagnostics event.
    """

    values, labels = _matrix_and_labels(F, labels)
    o = np.asarray(o, dtype=float).ravel()
    J, k = values.shape
    if o.shape[0] != J:
        raise SolverError(f"observation vector has length {o.shape[0]}, library has {J} rows")
    if not np.isfinite(o).all():
        raise SolverError("observation vector contains non-finite values")
    w = _check_weights(weights, k)
    problem = _equilibrate(values, w, labels)

    min_pi = _least_squares_residual(problem.A, o)
    pi_eff = _effective_pi(settings.pi, min_pi, o, settings)
    abs_tol = 1e-12 * max(1.0, float(np.linalg.norm(o)))

    iterations, converged, r_pri, r_dual, polished = 0, True, 0.0, 0.0, False
    method = settings.method
    if np.linalg.norm(o) <= pi_eff or problem.A.shape[1] == 0:
        x = np.zeros(problem.A.shape[1])
    elif method == "lasso_path":
        state = lasso_path(problem.A, o, pi_eff, problem.weights, settings)
        x, iterations, converged = state.x, state.iterations, state.converged
    else:
        if method == "ball_constrained":
            state = admm(problem.A, o, pi_eff, problem.weights, settings)
            x, iterations, converged = state.x, state.iterations, state.converged
            r_pri, r_dual = state.primal_residual, state.dual_residual
            x, polished = _finish(problem, o, pi_eff, x, settings.activity_threshold, settings, abs_tol)
            if not converged and polished:
                # iteration cap hit, but the polished point may already satisfy KKT
                converged = verify_optimality(
                    problem.A, o, x, pi_eff, problem.weights, settings.activity_threshold
                ).passed
            if not converged and settings.fallback == "conic":
                logger.info("ADMM stopped after %d iterations uncertified; re-solving with conic", iterations)
                log_event("solve.fallback", {"from": method, "to": "conic", "iterations": iterations})
                method = "conic"
        if method == "conic":
            state = conic(problem.A, o, pi_eff, problem.weights, settings)
            iterations, converged = iterations + state.iterations, state.converged
            threshold = max(settings.activity_threshold, CONIC_ACTIVITY)
            x, polished = _finish(problem, o, pi_eff, state.x, threshold, settings, abs_tol)

    residual = float(np.linalg.norm(problem.A @ x - o))
    if residual > pi_eff * (1 + FEASIBILITY_RTOL) + abs_tol:
        converged = False
    zeta = problem.lift(x)
    support = np.zeros(k, dtype=bool)
    support[problem.keep] = active_mask(x, settings.activity_threshold)

    result = SolveResult(
        coefficients=zeta,
        residual_norm=residual,
        iterations=iterations,
        converged=bool(converged),
        objective=float(w @ np.abs(zeta)),
        pi=settings.pi,
        pi_effective=pi_eff,
        min_feasible_pi=min_pi,
        primal_residual=r_pri,
        dual_residual=r_dual,
        method=method,
        polished=polished,
        active_set=tuple(int(j) for j in np.flatnonzero(support)),
    )
    payload = result.diagnostics()
    if alternative is not None:
        payload["alternative"] = alternative
    log_event("solve.done", payload)
    if not result.converged:
        logger.warning("solve did not converge (%s, %d iterations)", method, iterations)
    return result


def solve_multi(
    F,
    O: np.ndarray,
    settings: SolverSettings,
    alternatives: Sequence[int] | None = None,
    weights: np.ndarray | None = None,
) -> CoefficientMatrix:
    """Solve each requested column of ``O`` independently."""

    O = np.asarray(O, dtype=float)
    if O.ndim == 1:
        O = O[:, None]
    chosen = tuple(range(O.shape[1])) if alternatives is None else tuple(alternatives)
    for a in chosen:
        if not 0 <= a < O.shape[1]:
            raise SolverError(f"alternative {a} out of range ({O.shape[1]} available)")

    results = []
    for a in chosen:
        try:
            results.append(solve_one(F, O[:, a], settings, weights=weights, alternative=a))
        except SolverError as exc:
            raise exc.attributed(a) from exc
    coefficients = np.column_stack([r.coefficients for r in results])
    return CoefficientMatrix(coefficients, chosen, tuple(results))
