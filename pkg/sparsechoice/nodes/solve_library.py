from __future__ import annotations
from typing import Any, Dict

from sparsechoice.nodes import guarded
from sparsechoice.observability import span
from sparsechoice.sparsesolve import solve_multi


@guarded("sparsesolve")
def solve_library(state: Dict[str, Any]) -> Dict[str, Any]:
    config = state["config"]
    library = state["library"]
    with span("SolveLibrary", {"run": state.get("run"), "method": config.solver.method}):
        solution = solve_multi(library, state["observed"].shares, config.solver, config.alternatives)
        # downstream (coefficients.csv, t-tests, closed forms) reads coefficients of the raw labels
        return {"solution": solution.rescaled(library.scale_factors)}
