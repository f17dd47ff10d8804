from __future__ import annotations
from typing import Any, Dict, Optional, TypedDict

from langgraph.graph import END, START, StateGraph

from sparsechoice.config import ExperimentConfig
from sparsechoice.featlib import LibraryMatrix
from sparsechoice.nodes.aggregate_choices import aggregate_choices
from sparsechoice.nodes.build_library import build_library
from sparsechoice.nodes.generate_data import generate_data
from sparsechoice.nodes.record_failure import record_failure
from sparsechoice.nodes.solve_library import solve_library
from sparsechoice.sparsesolve import CoefficientMatrix
from sparsechoice.synthgen import EmpiricalProbabilities, GeneratedData


class RunState(TypedDict, total=False):
    config: ExperimentConfig
    run: int
    seed: int
    covariate_seed: int
    data: Optional[GeneratedData]
    observed: Optional[EmpiricalProbabilities]
    library: LibraryMatrix
    solution: CoefficientMatrix
    error: Optional[str]
    error_module: Optional[str]


def _next_or_fail(next_node: str):
    """Route to ``next_node`` unless the previous node recorded an error."""

    def route(state: Dict[str, Any]) -> str:
        return "RecordFailure" if state.get("error") else next_node

    return route


def build_graph():
    g = StateGraph(RunState)
    g.add_node("GenerateData", generate_data)
    g.add_node("AggregateChoices", aggregate_choices)
    g.add_node("BuildLibrary", build_library)
    g.add_node("SolveLibrary", solve_library)
    g.add_node("RecordFailure", record_failure)

    g.add_edge(START, "GenerateData")
    steps = ["GenerateData", "AggregateChoices", "BuildLibrary", "SolveLibrary"]
    for current, nxt in zip(steps, steps[1:] + [END]):
        g.add_conditional_edges(
            current,
            _next_or_fail(nxt),
            {nxt: nxt, "RecordFailure": "RecordFailure"},
        )
    g.add_edge("RecordFailure", END)

    # runs are independent and short-lived, so no checkpointer
    return g.compile()


def run_pipeline(
    config: ExperimentConfig,
    seed: int,
    run: int = 0,
    covariate_seed: int | None = None,
    data: GeneratedData | None = None,
    observed: EmpiricalProbabilities | None = None,
    graph=None,
) -> Dict[str, Any]:
    """Execute one end-to-end run and return its final state.

    ``data`` / ``observed`` skip generation when a dataset is supplied.
    """

    graph = graph or build_graph()
    state: Dict[str, Any] = {
        "config": config,
        "run": run,
        "seed": seed,
        "covariate_seed": seed if covariate_seed is None else covariate_seed,
        "data": data,
        "observed": observed,
        "error": None,
        "error_module": None,
    }
    return graph.invoke(state)
