from __future__ import annotations
from typing import Any, Dict

from sparsechoice.nodes import guarded
from sparsechoice.observability import span
from sparsechoice.synthgen import draw_and_aggregate


@guarded("synthgen")
def aggregate_choices(state: Dict[str, Any]) -> Dict[str, Any]:
    if state.get("observed") is not None:
        return {}
    config = state["config"]
    with span("AggregateChoices", {"run": state.get("run"), "replicates": config.replicates}):
        observed = draw_and_aggregate(state["data"].true_probs, config.replicates, state["seed"])
        return {"observed": observed}
