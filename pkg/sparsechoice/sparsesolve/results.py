"""Result records returned by the solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SolveResult", "CoefficientMatrix", "OptimalityCertificate"]


@dataclass(frozen=True)
class SolveResult:
    coefficients: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    objective: float
    pi: float
    pi_effective: float
    min_feasible_pi: float
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    method: str = "ball_constrained"
    polished: bool = False
    active_set: tuple[int, ...] = ()

    @property
    def relaxed(self) -> bool:
        return self.pi_effective > self.pi

    @property
    def slack(self) -> float:
        """Distance from the residual to the ball boundary (negative when outside)."""
        return self.pi_effective - self.residual_norm

    def diagnostics(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "objective": self.objective,
            "residual_norm": self.residual_norm,
            "slack": self.slack,
            "pi": self.pi,
            "pi_effective": self.pi_effective,
            "min_feasible_pi": self.min_feasible_pi,
            "polished": self.polished,
            "active": len(self.active_set),
        }


@dataclass(frozen=True)
class CoefficientMatrix:
    """Per-alternative solutions stacked column-wise (k x A)."""

    coefficients: np.ndarray
    alternatives: tuple[int, ...]
    results: tuple[SolveResult, ...]

    @property
    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.results])

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.iterations for r in self.results])

    @property
    def converged(self) -> np.ndarray:
        return np.array([r.converged for r in self.results], dtype=bool)

    def column(self, alternative: int) -> np.ndarray:
        return self.coefficients[:, self.alternatives.index(alternative)]

    def rescaled(self, factors: np.ndarray) -> CoefficientMatrix:
        """Coefficients multiplied row-wise by ``factors``; diagnostics are kept as solved."""
        factors = np.asarray(factors, dtype=float)
        return CoefficientMatrix(self.coefficients * factors[:, None], self.alternatives, self.results)


@dataclass(frozen=True)
class OptimalityCertificate:
    passed: bool
    worst_violation: float
    stationarity_violation: float
    feasibility_violation: float
    multiplier: float
    active_set: tuple[int, ...]
