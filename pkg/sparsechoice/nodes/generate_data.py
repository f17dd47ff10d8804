from __future__ import annotations
from typing import Any, Dict

from sparsechoice.nodes import guarded
from sparsechoice.observability import span
from sparsechoice.synthgen import generate


@guarded("synthgen")
def generate_data(state: Dict[str, Any]) -> Dict[str, Any]:
    if state.get("data") is not None:
        return {}
    config = state["config"]
    seed = state.get("covariate_seed", state["seed"])
    with span("GenerateData", {"run": state.get("run"), "seed": seed}):
        return {"data": generate(config.generator(seed))}
