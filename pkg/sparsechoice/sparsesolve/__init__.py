"""Sparse recovery: min ||zeta||_1 subject to ||F zeta - o||_2 <= pi."""

from sparsechoice.config import SolverSettings
from sparsechoice.sparsesolve.certificate import verify_optimality
from sparsechoice.sparsesolve.core import min_feasible_pi, solve_multi, solve_one
from sparsechoice.sparsesolve.results import CoefficientMatrix, OptimalityCertificate, SolveResult

__all__ = [
    "SolverSettings",
    "SolveResult",
    "CoefficientMatrix",
    "OptimalityCertificate",
    "solve_one",
    "solve_multi",
    "min_feasible_pi",
    "verify_optimality",
]
