from __future__ import annotations
from typing import Any, Dict

from sparsechoice import featlib
from sparsechoice.nodes import guarded
from sparsechoice.observability import span


@guarded("featlib")
def build_library(state: Dict[str, Any]) -> Dict[str, Any]:
    config = state["config"]
    spec = featlib.LibrarySpec.from_config(config.library)
    with span("BuildLibrary", {"run": state.get("run"), "columns": spec.size}):
        library = featlib.build_library(spec, state["data"].covariates, config.solver.scaling)
        return {"library": library}
